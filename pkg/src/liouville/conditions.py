"""The theorem battery: integral conditions, liminf test, routing, decay bound.

Public names follow the operations of the build contract (``check_T211``
is the tail condition on [1, inf), ``check_T221`` the liminf condition near
zero, ``check_T231`` the condition on the whole half-line).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .nonlinearity import NonlinearityExpr, evaluate, parse
from .quadrature import (
    DEFAULT_TOL,
    InconclusiveError,
    IntegralVerdict,
    Status,
    big_G,
    big_G_values,
    classical_ko,
    improper_integral,
)

__all__ = [
    "ProblemSpec",
    "Outcome",
    "Verdict",
    "LiminfDiagnostics",
    "check_T211",
    "check_T221",
    "check_T231",
    "classify",
    "remark22_equivalence",
    "g_inverse_of_G",
    "mean_bound",
    "decay_curve",
    "DecayTable",
]

LIMINF_SAMPLES = 61  # t = 2^-j, j = 0..60
LIMINF_FIT = 16
LIMINF_DEADBAND = 0.02
FLAT_RTOL = 1e-6


@dataclass(frozen=True)
class ProblemSpec:
    """Order m, dimension n, coefficient bound A and nonlinearity g."""

    m: int
    n: int
    g: NonlinearityExpr
    A: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.A > 0:
            raise ValueError("A must be positive")
        if isinstance(self.g, str):
            object.__setattr__(self, "g", parse(self.g))

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "A": self.A, "g": str(self.g)}


class Outcome(str, Enum):
    NO_GLOBAL_SOLUTIONS = "NoGlobalSolutions"
    ONLY_TRIVIAL_SOLUTIONS = "OnlyTrivialSolutions"
    BOUND_ONLY = "BoundOnly"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class LiminfDiagnostics:
    t_samples: np.ndarray
    values: np.ndarray
    log_values: np.ndarray
    fitted_exponent: float | None
    decision: str
    reason: str = ""
    G_slope: float | None = None

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "reason": self.reason,
            "fitted_exponent": self.fitted_exponent,
            "G_log_slope": self.G_slope,
            "t_samples": [float(t) for t in self.t_samples],
            "values": [float(v) for v in self.values],
        }


@dataclass
class Verdict:
    outcome: Outcome
    applied: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    spec: ProblemSpec | None = None

    def to_dict(self) -> dict:
        ev = {}
        for key, item in self.evidence.items():
            ev[key] = item.to_dict() if hasattr(item, "to_dict") else item
        return {"outcome": self.outcome.value, "theorems": self.applied, "evidence": ev}


# --------------------------------------------------------------------------
# the three conditions


def check_T211(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Finiteness of ``int_1^inf g^(-1/m) z^(1/m-1) dz``."""
    return improper_integral(spec.g, spec.m, 1.0, math.inf, tol)


def check_T231(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Finiteness of ``int_0^inf g^(-1/m) z^(1/m-1) dz``.

    A convergent verdict also records whether ``g(0) > 0``, which convexity
    and monotonicity force in that case.
    """
    verdict = improper_integral(spec.g, spec.m, 0.0, math.inf, tol)
    if verdict.converged:
        verdict.evidence["g_at_zero_positive"] = bool(evaluate(spec.g, 0.0) > 0)
    return verdict


def check_T221(spec: ProblemSpec, tol: float = DEFAULT_TOL,
               tail: IntegralVerdict | None = None) -> LiminfDiagnostics:
    """Numerical judgement of ``liminf_{t->0+} t * G(t)^(n-m) < inf``.

    For ``m >= n`` the exponent is non-positive and the condition holds
    outright.  Otherwise G is sampled at ``t = 2^-j``, the local power of G
    is fitted on the smallest 16 samples, and the sign of
    ``1 + (n - m) * slope`` decides, with a dead band of +-0.02.  Inside the
    dead band a numerically constant ``t * G^(n-m)`` still counts as bounded.
    """
    m, n = spec.m, spec.n
    t = 2.0 ** -np.arange(LIMINF_SAMPLES, dtype=float)
    empty = np.array([])
    if m >= n:
        return LiminfDiagnostics(empty, empty, empty, None, "satisfied",
                                 "m >= n: non-positive exponent of G")
    if tail is None:
        tail = check_T211(spec, tol)
    if tail.status is Status.DIVERGED:
        return LiminfDiagnostics(empty, empty, empty, None, "violated",
                                 "G is identically infinite")
    if tail.status is Status.INCONCLUSIVE:
        return LiminfDiagnostics(empty, empty, empty, None, "inconclusive",
                                 "tail integral inconclusive")
    try:
        G, _ = big_G_values(spec.g, m, t, tol)
    except InconclusiveError as exc:
        return LiminfDiagnostics(t, empty, empty, None, "inconclusive", str(exc))

    log_vals = (n - m) * np.log(G) + np.log(t)
    with np.errstate(over="ignore"):
        values = np.exp(log_vals)
    x = np.log(t[-LIMINF_FIT:])
    slope = float(np.polyfit(x, np.log(G[-LIMINF_FIT:]), 1)[0])
    exponent = 1.0 + (n - m) * slope
    window = log_vals[-LIMINF_FIT:]

    if exponent > LIMINF_DEADBAND and np.isfinite(window.min()):
        decision, reason = "satisfied", "t * G^(n-m) decays like a positive power of t"
    elif exponent < -LIMINF_DEADBAND and np.all(np.diff(window) > 0):
        decision, reason = "violated", "t * G^(n-m) grows like a negative power of t"
    elif np.all(np.isfinite(window)) and window.max() - window.min() <= math.log1p(FLAT_RTOL):
        decision, reason = "satisfied", "t * G^(n-m) is numerically constant near 0"
    else:
        decision, reason = "inconclusive", "fitted exponent inside the dead band"
    return LiminfDiagnostics(t, values, log_vals, exponent, decision, reason, slope)


# --------------------------------------------------------------------------
# routing


def classify(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> Verdict:
    """Run the battery: nonexistence first, then triviality, then the bound.

    ``NoGlobalSolutions`` needs the whole-line integral to converge;
    ``OnlyTrivialSolutions`` needs the tail integral to converge and the
    liminf condition (automatic for m >= n); ``BoundOnly`` is returned when
    the tail converges and the liminf condition is violated.  Everything
    else is ``Inconclusive``.
    """
    t231 = check_T231(spec, tol)
    t211 = check_T211(spec, tol)
    evidence: dict = {"t211": t211, "t231": t231}
    applied = [{"theorem": "nonexistence", "condition": "integral over (0, inf)",
                "status": t231.status.value}]
    if t231.converged:
        evidence["t221"] = None
        return Verdict(Outcome.NO_GLOBAL_SOLUTIONS, applied, evidence, spec)

    applied.append({"theorem": "triviality", "condition": "integral over (1, inf)",
                    "status": t211.status.value})
    if not t211.converged:
        evidence["t221"] = None
        return Verdict(Outcome.INCONCLUSIVE, applied, evidence, spec)

    t221 = check_T221(spec, tol, tail=t211)
    evidence["t221"] = t221
    applied.append({"theorem": "triviality_m_ge_n" if spec.m >= spec.n else "triviality",
                    "condition": "liminf t G^(n-m)(t)", "status": t221.decision})
    applied.append({"theorem": "mean_bound", "condition": "integral over (1, inf)",
                    "status": t211.status.value})
    if t221.decision == "satisfied":
        return Verdict(Outcome.ONLY_TRIVIAL_SOLUTIONS, applied, evidence, spec)
    if t221.decision == "violated":
        return Verdict(Outcome.BOUND_ONLY, applied, evidence, spec)
    return Verdict(Outcome.INCONCLUSIVE, applied, evidence, spec)


def remark22_equivalence(g: NonlinearityExpr, tol: float = DEFAULT_TOL) -> dict:
    """Compare the m = 2 tail condition with the classical Keller-Osserman integral."""
    tail = improper_integral(g, 2, 1.0, math.inf, tol)
    classical = classical_ko(g, tol)
    return {
        "g": str(g),
        "tail_condition": tail,
        "keller_osserman": classical,
        "agree": tail.status is classical.status,
    }


# --------------------------------------------------------------------------
# inverse of G and the decay bound


def _sup_G(spec: ProblemSpec, tol: float) -> float:
    whole = improper_integral(spec.g, spec.m, 0.0, math.inf, tol)
    if whole.status is Status.CONVERGED:
        return whole.value
    if whole.status is Status.DIVERGED:
        return math.inf
    raise InconclusiveError("cannot decide whether G is bounded near 0", whole)


def g_inverse_of_G(spec: ProblemSpec, r: float, tol: float = DEFAULT_TOL) -> float:
    """``t`` with ``G(t) = r``, by bracketing in ``ln t`` and Brent's method.

    Raises ``ValueError`` when G diverges or when ``r`` is not below
    ``sup G`` (G bounded near zero).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    tail = check_T211(spec, tol)
    if tail.status is Status.DIVERGED:
        raise ValueError("G is identically infinite; inverse undefined")
    if tail.status is Status.INCONCLUSIVE:
        raise InconclusiveError("tail integral inconclusive", tail)
    sup = _sup_G(spec, tol)
    if r >= sup:
        raise ValueError(f"inverse undefined at r={r:g}: G is bounded by {sup:.6g} near 0")

    cache: dict[float, float] = {}
    log_r = math.log(r)

    def phi(x: float) -> float:
        if x not in cache:
            cache[x] = math.log(big_G(spec.g, spec.m, math.exp(x), tol)) - log_r
        return cache[x]

    lo = hi = 0.0
    f0 = phi(0.0)
    step = 1.0
    if f0 > 0:  # G(1) > r: the root lies at larger t
        while phi(hi) > 0:
            lo, hi = hi, hi + step
            step *= 2
            if hi > 690:
                raise ValueError(f"inverse at r={r:g} lies beyond t=1e300")
    else:
        while phi(lo) < 0:
            lo, hi = lo - step, lo
            step *= 2
            if lo < -690:
                raise ValueError(f"inverse at r={r:g} lies below t=1e-300")
    x = brentq(phi, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    return math.exp(x)


def mean_bound(spec: ProblemSpec, r: float, C: float = 1.0, k: float = 1.0,
               tol: float = DEFAULT_TOL) -> float:
    """``C * G^-1(k r)``: the bound on ``r^-n int_{B_r} |u|`` for the given constants."""
    if not (C > 0 and k > 0):
        raise ValueError("C and k must be positive")
    return C * g_inverse_of_G(spec, k * r, tol)


@dataclass
class DecayTable:
    r: np.ndarray
    bound: np.ndarray
    strictly_decreasing: bool
    below_epsilon: bool | None
    epsilon: float | None = None

    def to_dict(self) -> dict:
        return {"r": [float(x) for x in self.r], "bound": [float(x) for x in self.bound],
                "strictly_decreasing": self.strictly_decreasing,
                "below_epsilon": self.below_epsilon, "epsilon": self.epsilon}

    def to_csv(self) -> str:
        rows = ["r,bound"] + [f"{a:.17g},{b:.17g}" for a, b in zip(self.r, self.bound)]
        return "\n".join(rows) + "\n"


def decay_curve(spec: ProblemSpec, r_grid, C: float = 1.0, k: float = 1.0,
                epsilon: float | None = None, tol: float = DEFAULT_TOL) -> DecayTable:
    """Tabulate :func:`mean_bound` on an increasing radius grid."""
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be strictly increasing")
    bound = np.array([mean_bound(spec, float(x), C, k, tol) for x in r])
    strictly = bool(np.all(np.diff(bound) < 0))
    below = None if epsilon is None else bool(bound[-1] < epsilon)
    return DecayTable(r, bound, strictly, below, epsilon)
