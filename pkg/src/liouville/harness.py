"""Numerical exercise of the integral machinery behind the triviality proofs.

Everything here works on a radial profile ``u(s)``: either a simulated
:class:`~liouville.simulator.RadialProfile` or a :class:`ClosedFormProfile`.
Ball integrals reduce to ``omega_n int_0^rho |u(s)| s^(n-1) ds`` with
``omega_n`` the area of the unit sphere.

The lemmas are stated for weak solutions of the inequality; applied to a
radial solution of the equation they test a special case, and the reports
say so.  Constants are existential in the statements, so the reports carry
empirical constants and the assertions are positivity and boundedness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .nonlinearity import Const, NonlinearityExpr, Product, Var, evaluate, parse, substitute
from .quadrature import DEFAULT_TOL, Status, adaptive_quad, improper_integral

__all__ = [
    "ball_volume",
    "sphere_area",
    "ClosedFormProfile",
    "JFunction",
    "J_of_rho",
    "ball_average",
    "Lemma33Trace",
    "lemma33_sequence",
    "lemma31_ratio",
    "Lemma34Case",
    "lemma34_check",
    "lemma35_check",
    "LemmaReport",
]

SCOPE_NOTE = "radial solution of the equation: a special case of the inequality"
QUAD_RTOL = 1e-12


def ball_volume(n: int, r: float) -> float:
    """Volume of the n-ball of radius r: ``pi^(n/2) r^n / Gamma(n/2 + 1)``."""
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    return math.pi ** (n / 2) * r ** n / gamma_fn(n / 2 + 1)


def sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n, ``2 pi^(n/2) / Gamma(n/2)``."""
    return 2 * math.pi ** (n / 2) / gamma_fn(n / 2)


@dataclass
class ClosedFormProfile:
    """A radial function given by a formula, for tests and hand examples."""

    fun: object
    n: int
    r_end: float = math.inf
    spec: object = None

    @classmethod
    def from_expr(cls, source: str, n: int, **kw) -> "ClosedFormProfile":
        expr = parse(source, variable="r")
        return cls(lambda s: evaluate(expr, s), n, **kw)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.fun(s), dtype=float), s.shape) * 1.0


def _check_range(profile, rho: float) -> None:
    if rho < 0:
        raise ValueError("radius must be non-negative")
    if rho > profile.r_end:
        raise ValueError(f"rho={rho:.17g} beyond the profile range {profile.r_end:.17g}")


def _radial_integral(profile, fun, a: float, b: float) -> float:
    """``omega_n int_a^b fun(u(s)) s^(n-1) ds`` on the profile's interpolant."""
    n = profile.n
    if b <= a:
        return 0.0

    def f(s):
        return fun(profile(s)) * s ** (n - 1)

    val, _ = adaptive_quad(f, a, b, rtol=QUAD_RTOL, atol=0.0, pieces=4)
    return sphere_area(n) * val


class JFunction:
    """``J_r(rho) = |B_2r|^-1 int_{B_rho} |u| dx`` with cached node integrals."""

    def __init__(self, profile, r: float, nodes: int = 64):
        if not r > 0:
            raise ValueError("r must be positive")
        self.profile, self.r = profile, float(r)
        self.n = profile.n
        self.volume = ball_volume(self.n, 2 * self.r)
        top = min(2 * self.r, profile.r_end)
        self._nodes = np.linspace(0.0, top, nodes + 1)
        pieces = [_radial_integral(profile, np.abs, a, b)
                  for a, b in zip(self._nodes[:-1], self._nodes[1:])]
        self._cum = np.concatenate([[0.0], np.cumsum(pieces)])

    def mass(self, rho: float) -> float:
        """``int_{B_rho} |u| dx``."""
        _check_range(self.profile, rho)
        if rho > self._nodes[-1]:
            return self._cum[-1] + _radial_integral(self.profile, np.abs, self._nodes[-1], rho)
        i = int(np.searchsorted(self._nodes, rho, side="right")) - 1
        i = min(max(i, 0), self._nodes.size - 1)
        return self._cum[i] + _radial_integral(self.profile, np.abs, self._nodes[i], rho)

    def __call__(self, rho: float) -> float:
        return self.mass(rho) / self.volume


def J_of_rho(profile, r: float, rho: float) -> float:
    """``(1/|B_2r|) int_{B_rho} |u| dx``."""
    return JFunction(profile, r)(rho)


def ball_average(profile, rho: float, g: NonlinearityExpr | None = None) -> float:
    """Mean of ``g(|u|)`` (or of ``|u|`` when ``g`` is None) over ``B_rho``."""
    _check_range(profile, rho)
    fun = np.abs if g is None else (lambda u: evaluate(g, np.abs(u)))
    return _radial_integral(profile, fun, 0.0, rho) / ball_volume(profile.n, rho)


def _scaled_argument(g: NonlinearityExpr, factor: float) -> NonlinearityExpr:
    return substitute(g, Product((Const(factor), Var())))


def _spec_of(profile, spec):
    spec = spec if spec is not None else getattr(profile, "spec", None)
    return spec


@dataclass
class LemmaReport:
    lemma: str
    inputs: dict
    empirical_constant: float | None
    passed: bool
    witnesses: dict = field(default_factory=dict)
    note: str = SCOPE_NOTE

    def to_dict(self) -> dict:
        return {"lemma": self.lemma, "inputs": self.inputs,
                "empirical_constant": self.empirical_constant, "pass": self.passed,
                "witnesses": self.witnesses, "note": self.note}


# --------------------------------------------------------------------------
# the doubling sequence


@dataclass
class Lemma33Trace:
    r: float
    r_sequence: list
    J_values: list
    termination: str  # "Endpoint" or "Doubling"
    branch: str | None
    empirical_C: float | None
    constants: dict
    step_constants: list
    step_bound: int

    @property
    def steps(self) -> int:
        return len(self.r_sequence) - 1

    def report(self) -> LemmaReport:
        return LemmaReport(
            "doubling_sequence", {"r": self.r},
            self.empirical_C,
            bool(self.empirical_C is None or self.empirical_C > 0),
            {"r_sequence": self.r_sequence, "J_values": self.J_values,
             "termination": self.termination, "branch": self.branch,
             "constants": self.constants, "step_constants": self.step_constants,
             "step_bound": self.step_bound},
        )

    def to_dict(self) -> dict:
        return self.report().to_dict()


def _next_radius(J: JFunction, lo: float, top: float, target: float, xtol: float) -> float:
    """``sup {rho in [lo, top] : J(rho) <= target}`` by bisection."""
    if J(top) <= target * (1 + 1e-12):
        return top
    a, b = lo, top
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if J(mid) <= target:
            a = mid
        else:
            b = mid
    return a


def lemma33_sequence(profile, r: float, spec=None, tol: float = DEFAULT_TOL) -> Lemma33Trace:
    """Build ``r_0 = r``, ``r_(i+1) = sup{rho <= 2r : J(rho) <= 2 J(r_i)}`` until ``r_i >= 3r/2``.

    Termination is ``Endpoint`` when the sequence reaches ``2r`` and
    ``Doubling`` otherwise.  With a problem spec available both candidate
    integrals over ``[J(r), J(2r)]`` are evaluated: ``int dz / g(z/2)``
    against ``r^m`` (branch ``reciprocal``) and
    ``int g^(-1/m)(z/2) z^(1/m-1) dz`` against ``r`` (branch ``ko``).
    """
    J = JFunction(profile, r)
    _check_range(profile, 2 * r)
    j0 = J(r)
    if not j0 > 0:
        raise ValueError("J_r(r) must be positive")
    seq, vals = [float(r)], [j0]
    xtol = 1e-10 * r
    while seq[-1] < 1.5 * r:
        nxt = _next_radius(J, seq[-1], 2 * r, 2 * vals[-1], xtol)
        if nxt <= seq[-1]:
            raise RuntimeError("doubling sequence failed to advance")
        seq.append(nxt)
        vals.append(J(nxt))
    termination = "Endpoint" if seq[-1] == 2 * r else "Doubling"
    j_top = vals[-1] if termination == "Endpoint" else J(2 * r)
    step_bound = math.ceil(profile.n * math.log2(j_top / j0)) + 1

    spec = _spec_of(profile, spec)
    constants, step_constants, branch, best = {}, [], None, None
    if spec is not None:
        g, m = spec.g, spec.m
        for a, b, ja, jb in zip(seq[:-1], seq[1:], vals[:-1], vals[1:]):
            denom = (b - a) ** m * float(evaluate(g, ja))
            step_constants.append((jb - ja) / denom if denom > 0 else math.inf)
        half = _scaled_argument(g, 0.5)
        recip = improper_integral(half, 1, j0, j_top, tol)
        ko = improper_integral(half, m, j0, j_top, tol)
        constants = {
            "reciprocal": recip.value / r ** m if recip.converged else None,
            "ko": ko.value / r if ko.converged else None,
        }
        finite = {k: v for k, v in constants.items() if v is not None}
        if finite:
            branch = max(finite, key=finite.get)
            best = finite[branch]
    return Lemma33Trace(float(r), seq, vals, termination, branch, best, constants,
                        step_constants, step_bound)


# --------------------------------------------------------------------------
# annulus inequality and the tail bound


def lemma31_ratio(profile, spec, r1: float, r2: float) -> float:
    """``int_{B_r2 minus B_r1} |u| / ((r2-r1)^m int_{B_r1} g(|u|))``."""
    if not 0 < r1 < r2 <= 2 * r1:
        raise ValueError("need 0 < r1 < r2 <= 2 r1")
    _check_range(profile, r2)
    g = spec.g
    annulus = _radial_integral(profile, np.abs, r1, r2)
    inner = _radial_integral(profile, lambda u: evaluate(g, np.abs(u)), 0.0, r1)
    if not inner > 0:
        raise ValueError("trivial profile: the g(|u|) mass of the inner ball vanishes")
    return annulus / ((r2 - r1) ** spec.m * inner)


def lemma35_check(profile, spec, r: float, tol: float = DEFAULT_TOL) -> LemmaReport:
    """Empirical constant ``C = (1/r) int_{J_r(r)}^inf g^(-1/m)(z/4) z^(1/m-1) dz``."""
    J = JFunction(profile, r)
    j = J(r)
    if not j > 0:
        raise ValueError("J_r(r) must be positive")
    verdict = improper_integral(_scaled_argument(spec.g, 0.25), spec.m, j, math.inf, tol)
    if verdict.status is Status.DIVERGED:
        raise ValueError("tail integral diverges: the finiteness hypothesis fails for g")
    if verdict.status is Status.INCONCLUSIVE:
        raise ValueError("tail integral inconclusive")
    c = verdict.value / r
    return LemmaReport("tail_bound", {"r": r, "m": spec.m, "n": spec.n, "g": str(spec.g)},
                       c, c > 0, {"J_r(r)": j, "integral": verdict.value,
                                  "error_bound": verdict.error_bound})


# --------------------------------------------------------------------------
# the integral comparison of two weight functions


def _as_fun(f):
    if isinstance(f, str):
        f = parse(f)
    if isinstance(f, NonlinearityExpr):
        return lambda z: evaluate(f, z)
    return f


@dataclass
class Lemma34Case:
    psi: object
    gamma: object
    theta: float
    alpha: float
    nu: float
    M1: float
    M2: float

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError("theta must exceed 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.nu > 1:
            raise ValueError("nu must exceed 1")
        if not (self.M1 > 0 and self.M2 > 0):
            raise ValueError("M1 and M2 must be positive")
        if self.M2 < self.nu * self.M1:
            raise ValueError("need M2 >= nu * M1")

    def inputs(self) -> dict:
        return {k: (str(v) if not isinstance(v, (int, float)) else v)
                for k, v in self.__dict__.items()}


def lemma34_check(case: Lemma34Case, samples: int = 257, rtol: float = 1e-10) -> LemmaReport:
    """Ratio of ``(int gamma^-a z^(a-1))^(1/a)`` to ``int 1/psi`` over ``[M1, M2]``.

    The hypothesis ``gamma(z) <= inf psi`` over ``(z/theta, theta z)`` is
    sampled on a log grid of ``[M1, M2]``; a violation raises with the
    witness point.
    """
    psi, gam = _as_fun(case.psi), _as_fun(case.gamma)
    zs = np.geomspace(case.M1, case.M2, samples)
    offsets = np.geomspace(1 / case.theta, case.theta, samples)[1:-1]
    for z in zs:
        floor = float(np.min(psi(z * offsets)))
        gz = float(gam(np.array([z]))[0])
        if gz > floor + rtol * (1 + abs(floor)):
            raise ValueError(f"hypothesis violated at zeta={z:.17g}: gamma={gz:.17g} > inf psi={floor:.17g}")
    a = case.alpha
    lhs_core, e1 = adaptive_quad(lambda z: gam(z) ** (-a) * z ** (a - 1), case.M1, case.M2,
                                 rtol=1e-13)
    rhs, e2 = adaptive_quad(lambda z: 1.0 / psi(z), case.M1, case.M2, rtol=1e-13)
    lhs = lhs_core ** (1 / a)
    ratio = lhs / rhs
    return LemmaReport("integral_comparison", case.inputs(), ratio, ratio > 0,
                       {"lhs": lhs, "rhs_core": rhs, "quad_errors": [e1, e2]},
                       note="continuous weight functions only")
