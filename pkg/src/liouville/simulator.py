"""Radial polyharmonic model problem and its blow-up dichotomy.

Contents:

* :class:`Jet`, truncated Taylor series with the usual recurrences, and
  :func:`jet_eval` which lifts an expression in ``r`` onto jets;
* :func:`apply_polyharmonic`, the iterated radial Laplacian
  ``f'' + (n-1) f'/r`` applied to jets;
* :func:`integrate_radial`, an outward shooting integrator for
  ``Delta^(m/2) u = g(u)`` with a series start at the origin and an
  operational blow-up detector;
* :func:`verify_counterexample`, which evaluates the residual of
  ``Delta^(m/2) u - c0 u ln^nu(2 + u)`` for ``u = exp(exp(k sqrt(1+r^2)))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import factorial

from .nonlinearity import (
    Const,
    EvaluationError,
    Exp,
    Ln,
    NonlinearityExpr,
    Power,
    Product,
    Sqrt,
    Sum,
    Var,
    Z_MAX,
    evaluate,
    parse,
)

__all__ = [
    "Jet",
    "jet_eval",
    "radial_laplacian",
    "apply_polyharmonic",
    "ProfileStatus",
    "RadialProfile",
    "integrate_radial",
    "CounterexampleReport",
    "verify_counterexample",
    "MAX_JET_ORDER",
]

MAX_JET_ORDER = 16


# --------------------------------------------------------------------------
# jets


class Jet:
    """Truncated Taylor series ``sum_k c_k h^k`` around a point.

    ``coeffs`` holds normalised coefficients ``c_k = f^(k)/k!``; ``derivs``
    gives the plain derivatives ``f^(k)``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.array(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("a jet needs at least one coefficient")

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, value: float, order: int) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, x: float, order: int) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def from_derivs(cls, derivs) -> "Jet":
        d = np.asarray(derivs, dtype=float)
        return cls(d / factorial(np.arange(d.size)))

    # views ----------------------------------------------------------------
    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    @property
    def derivs(self) -> np.ndarray:
        return self.coeffs * factorial(np.arange(self.coeffs.size))

    def __repr__(self) -> str:
        return f"Jet(derivs={self.derivs.tolist()})"

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order from {self.order} to {order}")
        return Jet(self.coeffs[: order + 1])

    def derivative(self) -> "Jet":
        """Jet of ``f'``; the order drops by one."""
        if self.order == 0:
            raise ValueError("derivative of an order-0 jet is not determined")
        k = np.arange(1, self.coeffs.size)
        return Jet(self.coeffs[1:] * k)

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                n = min(self.order, other.order)
                return other.truncate(n)
            return other
        return Jet.constant(float(other), self.order)

    def _pair(self, other):
        other = self._coerce(other)
        n = min(self.order, other.order)
        return self.coeffs[: n + 1], other.coeffs[: n + 1]

    def __add__(self, other):
        a, b = self._pair(other)
        return Jet(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        a, b = self._pair(other)
        return Jet(a - b)

    def __rsub__(self, other):
        a, b = self._pair(other)
        return Jet(b - a)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * float(other))
        a, b = self._pair(other)
        return Jet(np.convolve(a, b)[: a.size])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs / float(other))
        a, c = self._pair(other)
        if c[0] == 0:
            raise EvaluationError("jet division by a series vanishing at the point")
        b = np.zeros_like(a)
        for k in range(a.size):
            b[k] = (a[k] - np.dot(c[1 : k + 1], b[k - 1 :: -1][:k])) / c[0]
        return Jet(b)

    def __rtruediv__(self, other):
        return Jet.constant(float(other), self.order) / self

    def __pow__(self, p):
        p = float(p)
        a = self.coeffs
        if p == 0:
            return Jet.constant(1.0, self.order)
        if a[0] == 0:
            if p.is_integer() and p > 0:
                return self._int_pow(int(p))
            raise EvaluationError(f"power {p} of a series vanishing at the point")
        if a[0] < 0 and not p.is_integer():
            raise EvaluationError(f"non-integer power {p} of a negative value")
        b = np.zeros_like(a)
        b[0] = a[0] ** p
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            b[k] = np.dot(((p + 1) * j - k) * a[1 : k + 1], b[k - 1 :: -1][:k]) / (k * a[0])
        return Jet(b)

    def _int_pow(self, p: int) -> "Jet":
        result = Jet.constant(1.0, self.order)
        base = self
        while p:
            if p & 1:
                result = result * base
            base = base * base
            p >>= 1
        return result

    def exp(self) -> "Jet":
        a = self.coeffs
        b = np.zeros_like(a)
        try:
            b[0] = math.exp(a[0])
        except OverflowError as exc:
            raise EvaluationError("exp overflow in jet") from exc
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            b[k] = np.dot(j * a[1 : k + 1], b[k - 1 :: -1][:k]) / k
        return Jet(b)

    def log(self) -> "Jet":
        a = self.coeffs
        if a[0] <= 0:
            raise EvaluationError("ln of a non-positive value in jet")
        b = np.zeros_like(a)
        b[0] = math.log(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k)
            b[k] = (a[k] - np.dot(j * b[1:k], a[k - 1 : 0 : -1]) / k) / a[0]
        return Jet(b)

    def sqrt(self) -> "Jet":
        return self ** 0.5


def _jet_node(node, x: float, order: int) -> Jet:
    if isinstance(node, Const):
        return Jet.constant(node.value, order)
    if isinstance(node, Var):
        return Jet.variable(x, order)
    if isinstance(node, Sum):
        out = _jet_node(node.terms[0], x, order)
        for t in node.terms[1:]:
            out = out + _jet_node(t, x, order)
        return out
    if isinstance(node, Product):
        out = _jet_node(node.factors[0], x, order)
        for f in node.factors[1:]:
            out = out * _jet_node(f, x, order)
        return out
    if isinstance(node, Power):
        return _jet_node(node.base, x, order) ** node.exponent
    if isinstance(node, Ln):
        return _jet_node(node.arg, x, order).log()
    if isinstance(node, Exp):
        return _jet_node(node.arg, x, order).exp()
    if isinstance(node, Sqrt):
        return _jet_node(node.arg, x, order).sqrt()
    raise TypeError(f"unsupported node {node!r}")


def _as_expr(profile, variable: str = "r") -> NonlinearityExpr:
    if isinstance(profile, NonlinearityExpr):
        return profile
    if isinstance(profile, str):
        return parse(profile, variable=variable)
    raise TypeError("profile must be an expression or its source text")


def jet_eval(expr, r: float, order: int) -> Jet:
    """Value and first ``order`` derivatives of a closed-form profile at ``r``."""
    if not 0 <= order <= MAX_JET_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_JET_ORDER}]")
    return _jet_node(_as_expr(expr).root, float(r), int(order))


# --------------------------------------------------------------------------
# radial Laplacian


def radial_laplacian(f: Jet, r: float, n: int) -> Jet:
    """Jet of ``f'' + (n-1) f'/r`` at ``r``; the order drops by two.

    At ``r = 0`` the removable singularity is resolved through the even
    expansion: coefficient ``j`` of the result is ``(j+2)(j+n) c_(j+2)``,
    which requires ``f'(0) = 0``.
    """
    if f.order < 2:
        raise ValueError("radial Laplacian needs a jet of order >= 2")
    c = f.coeffs
    if r == 0:
        if abs(c[1]) > 1e-12 * max(1.0, np.max(np.abs(c))):
            raise ValueError("radial profile must have f'(0) = 0 at the origin")
        j = np.arange(f.order - 1)
        return Jet((j + 2) * (j + n) * c[2:])
    if r < 0:
        raise ValueError("radius must be non-negative")
    d1 = f.derivative()
    d2 = d1.derivative()
    k = np.arange(d1.order + 1)
    inv = Jet((-1.0) ** k / r ** (k + 1))
    return d2 + (n - 1) * (d1 * inv).truncate(d2.order)


def apply_polyharmonic(profile, n: int, half_m: int, r: float) -> float:
    """``(Delta^half_m f)(r)`` for a radial profile.

    ``profile`` is an expression in ``r`` (text or tree), a callable
    ``(r, order) -> Jet`` or a ready :class:`Jet` at ``r``.  A jet must have
    order at least ``2 half_m``; anything shorter is an error.
    """
    if half_m < 0:
        raise ValueError("half_m must be non-negative")
    need = 2 * half_m
    if isinstance(profile, Jet):
        jet = profile
    elif callable(profile) and not isinstance(profile, NonlinearityExpr):
        jet = profile(r, need)
    else:
        jet = jet_eval(profile, r, need)
    if jet.order < need:
        raise ValueError(f"jet order {jet.order} is insufficient for Delta^{half_m}")
    for _ in range(half_m):
        jet = radial_laplacian(jet, r, n)
    return jet.value


# --------------------------------------------------------------------------
# outward integration


class ProfileStatus(str, Enum):
    GLOBAL = "Global"
    BLOW_UP = "BlowUp"
    ABORTED = "Aborted"


CEILINGS = (1e12, 1e24, 1e48, 1e96, 1e192)
BRACKET_FACTOR = 20.0  # covers local blow-up exponents up to 20


@dataclass
class RadialProfile:
    """Sampled radial solution with its dense interpolant.

    ``derivative_stack[j]`` holds ``v_j`` (``v_0 = u``, ``v_(j+1) = Delta v_j``)
    on ``grid``.  Calling the profile evaluates ``u`` anywhere in
    ``[0, grid[-1]]`` through the integrator's dense output.
    """

    n: int
    m: int
    grid: np.ndarray
    values: np.ndarray
    derivative_stack: np.ndarray
    status: ProfileStatus
    blowup_radius: float | None = None
    bracket: tuple | None = None
    reason: str = ""
    evidence: dict = field(default_factory=dict)
    spec: object = None
    _pieces: list = field(default_factory=list, repr=False)

    @property
    def r_end(self) -> float:
        return float(self.grid[-1])

    def state(self, r) -> np.ndarray:
        """Interpolated state ``(v_0, v_0', v_1, v_1', ...)``; shape ``(2h, len(r))``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > self.r_end * (1 + 1e-14)):
            raise ValueError(f"radius outside the profile range [0, {self.r_end:.17g}]")
        out = np.empty((2 * (self.m // 2), r.size))
        for lo, hi, fun in self._pieces:
            mask = (r >= lo) & (r <= hi)
            if np.any(mask):
                out[:, mask] = fun(r[mask])
        return out

    def __call__(self, r):
        u = self.state(r)[0]
        return u if np.ndim(r) else float(u[0])

    def header(self) -> dict:
        return {
            "status": self.status.value,
            "n": self.n,
            "m": self.m,
            "blowup_radius": self.blowup_radius,
            "bracket": list(self.bracket) if self.bracket else None,
            "reason": self.reason,
            "r_end": self.r_end,
            "evidence": self.evidence,
        }

    def to_csv(self) -> str:
        h = self.m // 2
        cols = ["r", "u"] + [f"v_{j}" for j in range(1, h)]
        rows = [",".join(cols)]
        for i, r in enumerate(self.grid):
            vals = [r] + [self.derivative_stack[j, i] for j in range(h)]
            rows.append(",".join(f"{v:.17g}" for v in vals))
        return "\n".join(rows) + "\n"


def _series_start(g: NonlinearityExpr, c: np.ndarray, n: int):
    """Even Taylor coefficients (orders 0, 2, 4) of the cascade at the origin."""
    h = c.size
    g0 = float(evaluate(g, abs(c[0])))
    lead = np.append(c, g0)
    a2 = lead[1:] / (2 * n)
    try:
        dg = jet_eval(g, abs(c[0]), 1).coeffs[1] * np.sign(c[0] or 1.0)
    except (EvaluationError, ValueError, ZeroDivisionError):
        dg = 0.0
    nxt = np.append(a2[1:], dg * a2[0])
    a4 = nxt / (4 * (n + 2))
    return np.vstack([c, a2, a4])[:, :h]


def integrate_radial(spec, u0: float, r_max: float, *, initial=None,
                     rtol: float = 1e-12, atol: float = 1e-14, h0: float = 1e-4,
                     blowup_radius_tol: float = 1e-6, step_floor: float = 1e-4,
                     ceilings=CEILINGS, method: str = "DOP853") -> RadialProfile:
    """Shoot ``Delta^(m/2) u = g(|u|)`` outward from ``v_j(0) = c_j, v_j'(0) = 0``.

    ``initial`` gives ``c_1, ..., c_(m/2-1)``; missing entries are zero.
    A short Taylor step of length ``h0`` leaves the singular point, then an
    explicit Runge-Kutta solver takes over.  When ``u`` crosses a ceiling the
    run restarts from that point with the next ceiling; shrinking increments
    of the crossing radii bracket the blow-up radius.
    """
    m, n, g = spec.m, spec.n, spec.g
    if m % 2:
        raise ValueError("only even m has a radial polyharmonic model")
    if not r_max > h0:
        raise ValueError("r_max must exceed the series step")
    h = m // 2
    c = np.zeros(h)
    c[0] = u0
    if initial is not None:
        extra = np.asarray(initial, dtype=float)
        if extra.size > h - 1:
            raise ValueError(f"at most {h - 1} extra initial values for m={m}")
        c[1 : 1 + extra.size] = extra
    coef = _series_start(g, c, n)

    def series(r):
        r = np.asarray(r, dtype=float)
        out = np.empty((2 * h, r.size))
        out[0::2] = coef[0][:, None] + coef[1][:, None] * r ** 2 + coef[2][:, None] * r ** 4
        out[1::2] = 2 * coef[1][:, None] * r + 4 * coef[2][:, None] * r ** 3
        return out

    def rhs(r, y):
        dy = np.empty_like(y)
        dy[0::2] = y[1::2]
        forcing = np.append(y[2::2], evaluate(g, min(abs(y[0]), Z_MAX)))
        dy[1::2] = forcing - (n - 1) * y[1::2] / r
        return dy

    usable = [cl for cl in ceilings if evaluate(g, min(cl * 1e3, Z_MAX)) < 1e290]
    pieces = [(0.0, h0, series)]
    grid = [np.array([0.0]), np.array([h0])]
    start, y = h0, series([h0])[:, 0]
    crossings, last_step = [], math.inf
    status, reason, failed = ProfileStatus.GLOBAL, "", False
    for ceiling in usable:
        def hit(r, y, _c=ceiling):
            return abs(y[0]) - _c
        hit.terminal, hit.direction = True, 1
        sol = solve_ivp(rhs, (start, r_max), y, method=method, rtol=rtol, atol=atol,
                        dense_output=True, events=hit)
        if sol.t.size > 1:
            pieces.append((float(sol.t[0]), float(sol.t[-1]), sol.sol))
            grid.append(sol.t[1:])
            last_step = float(sol.t[-1] - sol.t[-2])
        if sol.status == 0:
            break
        if sol.status == -1:
            failed = True
            start, y = float(sol.t[-1]), sol.y[:, -1]
            reason = f"step collapse at r={start:.17g}: {sol.message}"
            break
        crossings.append(float(sol.t_events[0][0]))
        start, y = crossings[-1], sol.y_events[0][0]
    else:
        failed = True
        reason = "ceilings exhausted before r_max"

    bracket = radius = None
    evidence = {"crossings": crossings, "ceilings": list(usable[: len(crossings)]),
                "last_step": last_step, "series_step": h0}
    if failed:
        status = ProfileStatus.ABORTED
        big = abs(y[0]) >= usable[0] if usable else False
        collapsed = last_step <= step_floor * (1 + start)
        if big and collapsed:
            # local length scale |u/u'|: for u ~ (R - r)^(-a) it equals (R - r)/a
            scale = abs(y[0] / y[1]) if y[1] != 0 else math.inf
            bracket = (start, start + BRACKET_FACTOR * scale)
            radius = start + scale
            evidence["length_scale"] = scale
            if bracket[1] - bracket[0] <= blowup_radius_tol:
                status = ProfileStatus.BLOW_UP
                reason = f"u above {usable[0]:g} with collapsing steps; {reason}"
            else:
                reason = f"bracket wider than tolerance; {reason}"
        elif not big:
            reason = f"step underflow without value growth; {reason}"
        else:
            reason = f"values exceed the ceiling without step collapse; {reason}"

    r_all = np.concatenate(grid)
    profile = RadialProfile(n=n, m=m, grid=r_all, values=np.empty(0),
                            derivative_stack=np.empty((h, 0)), status=status,
                            blowup_radius=radius, bracket=bracket, reason=reason,
                            evidence=evidence, spec=spec, _pieces=pieces)
    st = profile.state(r_all)
    profile.values = st[0]
    profile.derivative_stack = st[0::2]
    return profile


# --------------------------------------------------------------------------
# the explicit counterexample


@dataclass
class CounterexampleReport:
    half_m: int
    n: int
    nu: float
    c0: float
    k: float
    passed: bool
    min_scaled_residual: float
    argmin_r: float
    certified_range: tuple
    r_grid: np.ndarray
    scaled_residual: np.ndarray
    residual: np.ndarray
    k_tried: list = field(default_factory=list)
    fd_check: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "half_m": self.half_m, "n": self.n, "nu": self.nu, "c0": self.c0,
            "k": self.k, "pass": self.passed,
            "min_scaled_residual": self.min_scaled_residual,
            "argmin_r": self.argmin_r,
            "certified_range": list(self.certified_range),
            "k_tried": self.k_tried,
            "fd_check": self.fd_check,
            "r_grid": [float(x) for x in self.r_grid],
            "scaled_residual": [float(x) for x in self.scaled_residual],
            "residual": [float(x) for x in self.residual],
            "note": self.note,
        }


LOG_LOG_ZMAX = math.log(math.log(Z_MAX))


def _inner(k: float) -> NonlinearityExpr:
    return parse(f"exp({k!r}*sqrt(1+r^2))", variable="r")


def _scaled_residuals(half_m, n, nu, c0, k, r_grid):
    """``residual / u`` on ``r_grid``: jets of ``u / u(r) = exp(psi - psi(r))``."""
    inner = _inner(k)
    out = np.empty(r_grid.size)
    for i, r in enumerate(r_grid):
        psi = jet_eval(inner, r, 2 * half_m)
        psi0 = psi.value
        ratio = (psi - psi0).exp()
        lap = apply_polyharmonic(ratio, n, half_m, r)
        log_term = psi0 + math.log1p(2.0 * math.exp(-psi0))
        out[i] = lap - c0 * log_term ** nu
    return out


def _fd_laplacian(k: float, n: int, r: float) -> tuple[float, float]:
    """Richardson-extrapolated central differences of ``Delta u`` at ``r > 0``."""
    def u(x):
        return math.exp(math.exp(k * math.sqrt(1.0 + x * x)))

    def d(hh):
        up, um, u0 = u(r + hh), u(r - hh), u(r)
        return (up - 2 * u0 + um) / hh ** 2, (up - um) / (2 * hh)

    hh = 1e-3 * (1 + r)
    d2a, d1a = d(hh)
    d2b, d1b = d(hh / 2)
    d2 = (4 * d2b - d2a) / 3
    d1 = (4 * d1b - d1a) / 3
    return d2 + (n - 1) * d1 / r, u(r)


def verify_counterexample(half_m: int, n: int, nu: float, c0: float = 1.0, k="auto",
                          r_grid=None, k_max: float = 2.0 ** 20,
                          fd_radii=(0.5, 1.0, 1.5)) -> CounterexampleReport:
    """Residual of ``Delta^half_m u >= c0 u ln^nu(2+u)`` for the double exponential.

    Residuals are computed as ``residual / u`` (same sign, no overflow);
    the certified range is where ``u`` itself stays below ``Z_MAX``, i.e.
    ``k sqrt(1+r^2) < ln ln Z_MAX``.  With ``k='auto'`` the ladder
    ``k = 2^(j/8)``, ``j = 0, 1, ...`` is scanned until the check passes,
    ``k`` exceeds ``k_max`` or the certified range becomes empty.
    """
    if half_m < 1:
        raise ValueError("half_m must be at least 1")
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    grid = np.linspace(0.0, 8.0, 801) if r_grid is None else np.asarray(r_grid, dtype=float)
    if np.any(grid < 0):
        raise ValueError("radii must be non-negative")

    if k == "auto":
        ladder, j = [], 0
        while 2.0 ** (j / 8) <= k_max:
            ladder.append(2.0 ** (j / 8))
            j += 1
    else:
        ladder = [float(k)]

    tried, report = [], None
    for kk in ladder:
        rho_max = LOG_LOG_ZMAX / kk
        if rho_max <= 1.0:
            note = f"certified range empty for k={kk:.6g}: u(0) exceeds {Z_MAX:g}"
            if report is None:
                report = CounterexampleReport(half_m, n, nu, c0, kk, False, math.nan, math.nan,
                                              (0.0, 0.0), np.empty(0), np.empty(0),
                                              np.empty(0), note=note)
            else:
                report.note = note
            break
        r_over = math.sqrt(rho_max ** 2 - 1.0)
        sub = grid[grid < r_over]
        scaled = _scaled_residuals(half_m, n, nu, c0, kk, sub)
        with np.errstate(over="ignore", invalid="ignore"):
            u_vals = np.exp(np.exp(kk * np.sqrt(1 + sub ** 2)))
            residual = scaled * u_vals
        i = int(np.argmin(scaled)) if scaled.size else 0
        ok = bool(scaled.size and scaled.min() >= 0)
        tried.append({"k": kk, "pass": ok,
                      "min_scaled_residual": float(scaled.min()) if scaled.size else math.nan})
        report = CounterexampleReport(
            half_m, n, nu, c0, kk, ok,
            float(scaled[i]) if scaled.size else math.nan,
            float(sub[i]) if scaled.size else math.nan,
            (0.0, r_over), sub, scaled, residual,
        )
        if ok:
            break
    report.k_tried = tried

    if report.r_grid.size:
        for r in fd_radii:
            if not 0 < r < report.certified_range[1]:
                continue
            psi = jet_eval(_inner(report.k), r, 2)
            jet_lap = apply_polyharmonic((psi - psi.value).exp(), n, 1, r)
            fd_lap, u_r = _fd_laplacian(report.k, n, r)
            jet_abs = jet_lap * u_r
            report.fd_check.append({"r": r, "jet": jet_abs, "finite_difference": fd_lap,
                                    "rel_err": abs(jet_abs - fd_lap) / abs(fd_lap)})
    return report
