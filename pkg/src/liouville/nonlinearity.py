"""Nonlinearities g(zeta): expression trees, parser, evaluation, admissibility.

The node set is deliberately closed (constants, the variable, n-ary sums and
products, real powers, ln, exp, sqrt).  Every tree can therefore be evaluated
in three ways:

* on floats / numpy arrays (:func:`evaluate`),
* in the log domain, as ``(sign, log|value|)`` pairs (:func:`log_evaluate`),
  which lets the quadrature code reach arguments like ``exp(1e6)``,
* on truncated Taylor series (see :mod:`liouville.simulator`).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

Z_MAX = 1e300

__all__ = [
    "Z_MAX",
    "Const",
    "Var",
    "Sum",
    "Product",
    "Power",
    "Ln",
    "Exp",
    "Sqrt",
    "NonlinearityExpr",
    "ParseError",
    "EvaluationError",
    "parse",
    "render",
    "evaluate",
    "log_evaluate",
    "substitute",
    "scaled",
    "AdmissibilityReport",
    "GridSpec",
    "check_admissible",
]


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the 0-based character index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    """Domain error while evaluating an expression (e.g. ln of a non-positive)."""


# --------------------------------------------------------------------------
# nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "zeta"


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Product:
    factors: tuple


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Ln:
    arg: "Node"


@dataclass(frozen=True)
class Exp:
    arg: "Node"


@dataclass(frozen=True)
class Sqrt:
    arg: "Node"


Node = Union[Const, Var, Sum, Product, Power, Ln, Exp, Sqrt]


@dataclass(frozen=True)
class NonlinearityExpr:
    """A parsed nonlinearity.  Equality compares the tree only."""

    root: Node
    display_name: str = field(default="", compare=False)
    variable: str = field(default="zeta", compare=False)
    warnings: tuple = field(default=(), compare=False)

    def __call__(self, zeta):
        return evaluate(self, zeta)

    def __str__(self) -> str:
        return self.display_name or render(self)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)
_FUNCTIONS = {"ln": Ln, "exp": Exp, "sqrt": Sqrt}


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ParseError(f"unexpected character {source[start]!r}", start)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    # precedence climbing:
    #   expr   := term (('+'|'-') term)*
    #   term   := unary ('*' unary)*
    #   unary  := '-' unary | power
    #   power  := atom ('^' unary)?          right associative
    #   atom   := number | name | name '(' expr ')' | '(' expr ')'

    def __init__(self, source: str, variables: tuple[str, ...]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            where = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {where}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            terms.append(rhs if op == "+" else _negate(rhs))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Node:
        factors = [self.unary()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.unary())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return _negate(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            exponent = self.unary()
            value = _constant_value(exponent)
            if value is None:
                raise ParseError("exponent must be a numeric constant", pos + 1)
            return Power(base, value)
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCTIONS[text](arg)
            if text in self.variables:
                return Var(text)
            raise ParseError(f"unknown identifier {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        where = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {where}", pos)


def _negate(node: Node) -> Node:
    if isinstance(node, Const):
        return Const(-node.value)
    return Product((Const(-1.0), node))


def _has_var(node: Node) -> bool:
    return isinstance(node, Var) or any(_has_var(c) for c in _children(node))


def _constant_value(node: Node):
    """Value of a variable-free subtree, ``None`` otherwise."""
    if isinstance(node, Const):
        return node.value
    if _has_var(node):
        return None
    try:
        value = float(_eval(node, np.float64(0.0)))
    except (EvaluationError, ArithmeticError):
        return None
    return value if math.isfinite(value) else None


def _nonnegative(node: Node) -> bool:
    """Structural guarantee that ``node`` is >= 0 for zeta >= 0."""
    if isinstance(node, Const):
        return node.value >= 0
    if isinstance(node, (Var, Exp)):
        return True
    if isinstance(node, (Sum, Product)):
        parts = node.terms if isinstance(node, Sum) else node.factors
        return all(_nonnegative(p) for p in parts)
    if isinstance(node, (Power, Sqrt)):
        base = node.base if isinstance(node, Power) else node.arg
        return _nonnegative(base)
    if isinstance(node, Ln):
        # ln(c + nonneg) with c >= 1
        arg = node.arg
        if isinstance(arg, Const):
            return arg.value >= 1
        if isinstance(arg, Sum):
            consts = sum(t.value for t in arg.terms if isinstance(t, Const))
            rest = [t for t in arg.terms if not isinstance(t, Const)]
            return consts >= 1 and all(_nonnegative(t) for t in rest)
        return False
    return False


def _collect_warnings(node: Node, out: list) -> None:
    if isinstance(node, (Power, Sqrt)):
        base = node.base if isinstance(node, Power) else node.arg
        exponent = node.exponent if isinstance(node, Power) else 0.5
        if not float(exponent).is_integer() and not _nonnegative(base):
            out.append(f"exponent {exponent:g} applied to a base that may be negative: {_render(base)}")
    for child in _children(node):
        _collect_warnings(child, out)


def _children(node: Node):
    if isinstance(node, Sum):
        return node.terms
    if isinstance(node, Product):
        return node.factors
    if isinstance(node, Power):
        return (node.base,)
    if isinstance(node, (Ln, Exp, Sqrt)):
        return (node.arg,)
    return ()


def parse(source: str, variable: str = "zeta") -> NonlinearityExpr:
    """Parse infix text such as ``"zeta * ln(2 + zeta)^2"``.

    Grammar: ``+ - * ^``, parentheses, decimal literals, ``ln``, ``exp``,
    ``sqrt`` and the single variable (``zeta`` unless ``variable`` says
    otherwise).  ``^`` binds tightest and is right associative; its exponent
    must reduce to a numeric constant.  Raises :class:`ParseError` carrying
    the offending offset.
    """
    root = _Parser(source, (variable,)).parse()
    warnings: list[str] = []
    _collect_warnings(root, warnings)
    return NonlinearityExpr(root, display_name=source.strip(), variable=variable,
                            warnings=tuple(warnings))


# --------------------------------------------------------------------------
# rendering


def _fmt(value: float) -> str:
    text = repr(float(value))
    return f"({text})" if value < 0 or text.startswith("-") else text


def _render(node: Node) -> str:
    if isinstance(node, Const):
        return _fmt(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Sum):
        return "(" + " + ".join(_render(t) for t in node.terms) + ")"
    if isinstance(node, Product):
        return "(" + " * ".join(_render(f) for f in node.factors) + ")"
    if isinstance(node, Power):
        return f"({_render(node.base)} ^ {_fmt(node.exponent)})"
    if isinstance(node, Ln):
        return f"ln({_render(node.arg)})"
    if isinstance(node, Exp):
        return f"exp({_render(node.arg)})"
    if isinstance(node, Sqrt):
        return f"sqrt({_render(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def render(expr: NonlinearityExpr | Node) -> str:
    """Canonical text form; every compound node is parenthesised."""
    root = expr.root if isinstance(expr, NonlinearityExpr) else expr
    return _render(root)


# --------------------------------------------------------------------------
# tree surgery


def substitute(expr: NonlinearityExpr, inner: Node) -> NonlinearityExpr:
    """Return g(inner(zeta)) by replacing every variable leaf with ``inner``."""

    def walk(node: Node) -> Node:
        if isinstance(node, Var):
            return inner
        if isinstance(node, Sum):
            return Sum(tuple(walk(t) for t in node.terms))
        if isinstance(node, Product):
            return Product(tuple(walk(f) for f in node.factors))
        if isinstance(node, Power):
            return Power(walk(node.base), node.exponent)
        if isinstance(node, (Ln, Exp, Sqrt)):
            return type(node)(walk(node.arg))
        return node

    root = walk(expr.root)
    return NonlinearityExpr(root, display_name=_render(root), variable=expr.variable)


def scaled(expr: NonlinearityExpr, factor: float) -> NonlinearityExpr:
    """``factor * g`` as a product tree."""
    root = Product((Const(float(factor)), expr.root))
    return NonlinearityExpr(root, display_name=_render(root), variable=expr.variable)


# --------------------------------------------------------------------------
# evaluation on floats


def _split_expm1(node: Sum):
    """``(x, rest)`` when the sum contains ``exp(x)`` and ``-1``, else ``None``.

    Both evaluators then use ``expm1(x)``, avoiding the cancellation of
    ``exp(x) - 1`` for small ``x``.
    """
    terms = list(node.terms)
    i = next((k for k, t in enumerate(terms) if isinstance(t, Exp)), None)
    j = next((k for k, t in enumerate(terms) if isinstance(t, Const) and t.value == -1.0), None)
    if i is None or j is None:
        return None
    arg = terms[i].arg
    rest = [t for k, t in enumerate(terms) if k not in (i, j)]
    return arg, rest


def _eval(node: Node, z):
    if isinstance(node, Const):
        return np.full_like(z, node.value)
    if isinstance(node, Var):
        return z
    if isinstance(node, Sum):
        fused = _split_expm1(node)
        if fused is not None:
            out = np.expm1(_eval(fused[0], z))
            rest = fused[1]
        else:
            out, rest = _eval(node.terms[0], z), node.terms[1:]
        for t in rest:
            out = out + _eval(t, z)
        return out
    if isinstance(node, Product):
        vals = [_eval(f, z) for f in node.factors]
        out = vals[0]
        for v in vals[1:]:
            # 0 * inf is 0 here: a vanishing factor wins over saturation
            prod = out * v
            out = np.where((out == 0) | (v == 0), 0.0, prod)
        return out
    if isinstance(node, Power):
        base = _eval(node.base, z)
        p = node.exponent
        if not float(p).is_integer() and np.any(base < 0):
            raise EvaluationError(f"non-integer power {p:g} of a negative number")
        return base**p
    if isinstance(node, Sqrt):
        arg = _eval(node.arg, z)
        if np.any(arg < 0):
            raise EvaluationError("sqrt of a negative number")
        return np.sqrt(arg)
    if isinstance(node, Ln):
        arg = _eval(node.arg, z)
        if np.any(arg <= 0):
            raise EvaluationError("ln of a non-positive number")
        return np.log(arg)
    if isinstance(node, Exp):
        return np.exp(_eval(node.arg, z))
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: NonlinearityExpr, zeta, *, return_flag: bool = False):
    """Evaluate g at ``zeta`` (scalar or array, 0 <= zeta <= Z_MAX).

    Values above ``Z_MAX`` saturate to ``+inf``; with ``return_flag=True`` a
    second value reports whether saturation happened.  Domain errors raise
    :class:`EvaluationError`.
    """
    scalar = np.ndim(zeta) == 0
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0) or np.any(z > Z_MAX) or np.any(np.isnan(z)):
        raise EvaluationError(f"argument outside [0, {Z_MAX:g}]")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = np.asarray(_eval(expr.root, z), dtype=float)
    if np.any(np.isnan(out)):
        raise EvaluationError("undefined value (nan) while evaluating " + render(expr))
    saturated = np.abs(out) > Z_MAX
    out = np.where(saturated, np.copysign(np.inf, out), out)
    if scalar:
        out = float(out)
    if return_flag:
        return out, bool(np.any(saturated))
    return out


# --------------------------------------------------------------------------
# evaluation in the log domain


def _logadd(s1, l1, s2, l2):
    """(s1 e^l1) + (s2 e^l2) as a (sign, log|.|) pair."""
    big = np.maximum(np.where(s1 == 0, -np.inf, l1), np.where(s2 == 0, -np.inf, l2))
    finite = np.isfinite(big)
    shift = np.where(finite, big, 0.0)
    total = s1 * np.exp(np.where(s1 == 0, -np.inf, l1) - shift) + s2 * np.exp(
        np.where(s2 == 0, -np.inf, l2) - shift
    )
    total = np.where(np.isnan(total), 0.0, total)
    sign = np.sign(total)
    with np.errstate(divide="ignore"):
        log = np.where(sign == 0, -np.inf, np.log(np.abs(total)) + shift)
    # both +inf of the same sign
    both_inf = (big == np.inf) & (s1 == s2)
    sign = np.where(both_inf, s1, sign)
    log = np.where(both_inf, np.inf, log)
    return sign, log


def _to_value(sign, log):
    with np.errstate(over="ignore"):
        return sign * np.exp(log)


def _log_expm1(a_sign, a_log):
    """``expm1(a)`` as a (sign, log|.|) pair for ``a`` given as a pair."""
    a = _to_value(a_sign, a_log)
    small = np.abs(a) < 30.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.log(np.abs(np.expm1(np.where(small, a, 0.0))))
        far = np.where(a > 0, a + np.log1p(-np.exp(-np.abs(a))), 0.0)
    sign = np.where(small, np.sign(a), np.where(a > 0, 1.0, -1.0))
    log = np.where(small, near, far)
    return sign, log


def _leval(node: Node, s):
    shape = np.shape(s)
    if isinstance(node, Const):
        v = node.value
        if v == 0:
            return np.zeros(shape), np.full(shape, -np.inf)
        return np.full(shape, np.sign(v)), np.full(shape, np.log(abs(v)))
    if isinstance(node, Var):
        return np.ones(shape), s
    if isinstance(node, Sum):
        fused = _split_expm1(node)
        if fused is not None:
            sign, log = _log_expm1(*_leval(fused[0], s))
            rest = fused[1]
        else:
            (sign, log), rest = _leval(node.terms[0], s), node.terms[1:]
        for t in rest:
            sign, log = _logadd(sign, log, *_leval(t, s))
        return sign, log
    if isinstance(node, Product):
        sign, log = np.ones(shape), np.zeros(shape)
        for f in node.factors:
            fs, fl = _leval(f, s)
            sign = sign * fs
            log = log + np.where(fs == 0, -np.inf, fl)
        log = np.where(sign == 0, -np.inf, log)
        return sign, log
    if isinstance(node, (Power, Sqrt)):
        base = node.base if isinstance(node, Power) else node.arg
        p = node.exponent if isinstance(node, Power) else 0.5
        bs, bl = _leval(base, s)
        integer = float(p).is_integer()
        if np.any(bs < 0) and not integer:
            raise EvaluationError(f"non-integer power {p:g} of a negative number")
        if integer:
            sign = np.where(bs == 0, 0.0 if p > 0 else 1.0, bs ** int(p))
        else:
            sign = np.where(bs == 0, 0.0 if p > 0 else 1.0, 1.0)
        if p == 0:
            return np.ones(shape), np.zeros(shape)
        log = np.where(bs == 0, -np.inf if p > 0 else np.inf, p * bl)
        return sign, log
    if isinstance(node, Ln):
        a_s, a_l = _leval(node.arg, s)
        if np.any(a_s <= 0):
            raise EvaluationError("ln of a non-positive number")
        # ln(arg) = a_l, itself a real number with its own sign
        sign = np.sign(a_l)
        with np.errstate(divide="ignore"):
            log = np.where(sign == 0, -np.inf, np.log(np.abs(a_l)))
        return sign, log
    if isinstance(node, Exp):
        a_s, a_l = _leval(node.arg, s)
        return np.ones(shape), _to_value(a_s, a_l)
    raise TypeError(f"not an expression node: {node!r}")


def log_evaluate(expr: NonlinearityExpr, log_zeta):
    """Evaluate g at ``zeta = exp(log_zeta)`` returning ``(sign, log|g|)``.

    Arguments far outside the float range (``log_zeta`` up to ~1e300) are
    fine as long as the intermediate logarithms stay finite.
    """
    s = np.asarray(log_zeta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        sign, log = _leval(expr.root, s)
    if np.any(np.isnan(log)):
        raise EvaluationError("undefined value (nan) while evaluating " + render(expr))
    return sign, log


# --------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class GridSpec:
    """Sampling plan: log-spaced points plus a linear block near the origin."""

    log_count: int = 512
    log_lo: float = 1e-8
    log_hi: float = 1e8
    lin_count: int = 128
    lin_lo: float = 0.0
    lin_hi: float = 10.0
    rtol: float = 1e-10

    def points(self) -> np.ndarray:
        pts = np.concatenate([
            np.geomspace(self.log_lo, self.log_hi, self.log_count),
            np.linspace(self.lin_lo, self.lin_hi, self.lin_count),
        ])
        return np.unique(pts)


@dataclass
class CheckResult:
    passed: bool
    witness: tuple | None = None
    violation: float = 0.0


@dataclass
class AdmissibilityReport:
    nondecreasing: CheckResult
    convex: CheckResult
    positive_on_positive: CheckResult
    grid: np.ndarray
    checked_range: tuple[float, float]
    warnings: tuple = ()

    @property
    def ok(self) -> bool:
        return self.nondecreasing.passed and self.convex.passed and self.positive_on_positive.passed

    def to_dict(self) -> dict:
        def one(c: CheckResult):
            return {"pass": c.passed, "witness": list(c.witness) if c.witness else None,
                    "violation": c.violation}

        return {
            "nondecreasing": one(self.nondecreasing),
            "convex": one(self.convex),
            "positive_on_positive": one(self.positive_on_positive),
            "checked_range": list(self.checked_range),
            "grid_size": int(self.grid.size),
            "warnings": list(self.warnings),
        }


def check_admissible(g: NonlinearityExpr, grid_spec: GridSpec | None = None) -> AdmissibilityReport:
    """Sample the standing hypotheses on g: non-decreasing, convex, g > 0 on (0, inf).

    Failures never raise; each failed check carries a witness point (or a
    triple ``(a, midpoint, b)`` for convexity).  Only the sampled range is
    checked and it is reported as such.
    """
    spec = grid_spec or GridSpec()
    z = spec.points()
    gz = evaluate(g, z)
    tol = spec.rtol * (1.0 + np.abs(gz))

    # monotonicity on consecutive samples
    with np.errstate(invalid="ignore"):
        drop = gz[:-1] - gz[1:] - np.maximum(tol[:-1], tol[1:])
    drop = np.where(np.isnan(drop), 0.0, drop)
    if np.any(drop > 0):
        i = int(np.argmax(drop > 0))
        mono = CheckResult(False, (float(z[i]), float(z[i + 1])), float(drop[i]))
    else:
        mono = CheckResult(True)

    # midpoint convexity on every sampled pair
    ia, ib = np.triu_indices(z.size, k=1)
    a, b = z[ia], z[ib]
    mid = 0.5 * (a + b)
    gm = evaluate(g, mid)
    chord = 0.5 * (gz[ia] + gz[ib])
    with np.errstate(invalid="ignore"):
        excess = gm - chord - spec.rtol * (1.0 + np.abs(chord))
    bad = np.nan_to_num(excess, nan=-1.0) > 0
    if np.any(bad):
        # witness: the pair with the largest curvature deficit excess / half-width^2
        h = 0.5 * (b - a)
        score = np.where(bad, excess / (h * h), -np.inf)
        k = int(np.argmax(score))
        conv = CheckResult(False, (float(a[k]), float(mid[k]), float(b[k])), float(excess[k]))
    else:
        conv = CheckResult(True)

    positive = z > 0
    nonpos = positive & (gz <= 0)
    if np.any(nonpos):
        i = int(np.argmin(np.where(nonpos, gz, np.inf)))
        pos = CheckResult(False, (float(z[i]),), float(-gz[i]))
    else:
        pos = CheckResult(True)

    return AdmissibilityReport(mono, conv, pos, z, (float(z[0]), float(z[-1])), g.warnings)
