"""Improper integrals of the Keller-Osserman type with an explicit verdict.

All integrals are computed in the logarithmic variable ``s = ln(zeta)``.  An
integral over ``zeta`` becomes ``int exp(log_h(s)) ds`` with
``log_h(s) = log f(e^s) + s`` evaluated in the log domain, so arguments far
beyond the float range (``zeta = exp(1e6)``) are reachable.

An infinite endpoint is approached in two phases:

1. dyadic blocks ``[2^k, 2^(k+1)]`` in zeta (unit steps of ``ln 2`` in s),
   64 of them;
2. doubling blocks ``[S 2^j, S 2^(j+1)]`` in s, which turn logarithmic decay
   such as ``1/(zeta ln^a zeta)`` into geometric decay of the block sums.

Each phase feeds its block integrals to :class:`_BlockSeries`, which declares
divergence (ceiling or K non-decaying blocks), convergence (block ratios
settled below one with a small extrapolated tail) or keeps going.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .nonlinearity import NonlinearityExpr, evaluate, log_evaluate

__all__ = [
    "Status",
    "IntegralVerdict",
    "InconclusiveError",
    "GTable",
    "ko_integrand",
    "improper_integral",
    "integrate_log",
    "big_G",
    "big_G_values",
    "big_G_table",
    "classical_ko",
    "adaptive_quad",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-9

# divergence rule: K consecutive non-decaying blocks above DELTA, or a ceiling
DIVERGENCE_BLOCKS = 8
DIVERGENCE_DELTA = 1e-8
DIVERGENCE_CEILING = 1e12
RATIO_ONE = 1.0 - 1e-6  # a block ratio at or above this counts as non-decaying
RATIO_WINDOW = 4
DEFICIT_FACTOR = 0.75
MAX_PANELS = 20_000
RATIO_MAX_CONVERGENT = 1.0 - 1e-4
DYADIC_BLOCKS = 64
LOG_S_LIMIT = 1e300
LN2 = math.log(2.0)


class Status(str, Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class IntegralVerdict:
    status: Status
    value: float | None
    error_bound: float
    evidence: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_dict(self, full: bool = False) -> dict:
        ev = self.evidence if full else {k: v for k, v in self.evidence.items()
                                         if not isinstance(v, (list, np.ndarray))}
        return {"status": self.status.value, "value": self.value,
                "error_bound": self.error_bound, "evidence": ev}


class InconclusiveError(RuntimeError):
    def __init__(self, message: str, verdict: IntegralVerdict | None = None):
        super().__init__(message)
        self.verdict = verdict


# --------------------------------------------------------------------------
# Gauss-Kronrod 7/15

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
XK = np.concatenate([-_XGK[:-1], _XGK[::-1]])
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
WG = np.zeros(15)
WG[1:7:2] = _WG[:3]
WG[7] = _WG[3]
WG[9:15:2] = _WG[2::-1]


def _gk15(fun, a: np.ndarray, b: np.ndarray):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * XK[None, :]
    y = np.asarray(fun(x.ravel()), dtype=float).reshape(x.shape)
    with np.errstate(invalid="ignore", over="ignore"):
        rk = y @ WK
        rg = y @ WG
        mean = 0.5 * rk
        resasc = np.abs(y - mean[:, None]) @ WK
        raw = np.abs(rk - rg)
        err = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * raw / np.where(resasc > 0, resasc, 1.0)) ** 1.5), raw)
        err = np.maximum(err, 50.0 * np.finfo(float).eps * np.abs(rk))
    return h * rk, h * err


def _adaptive_groups(fun, lo, hi, rtol: float, atol: float = 0.0,
                     pieces: int | np.ndarray = 1, max_rounds: int = 60):
    """Integrate ``fun`` over each ``[lo[i], hi[i]]`` to relative accuracy ``rtol``.

    All panels of all groups are evaluated together.  Returns per-group
    values, error estimates and a flag that is set when some panel could not
    be refined to tolerance.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    ngroups = lo.size
    pieces = np.broadcast_to(np.asarray(pieces, dtype=int), lo.shape)
    gid = np.repeat(np.arange(ngroups), pieces)
    frac0 = np.concatenate([np.arange(p) / p for p in pieces])
    frac1 = np.concatenate([np.arange(1, p + 1) / p for p in pieces])
    a = lo[gid] + (hi - lo)[gid] * frac0
    b = lo[gid] + (hi - lo)[gid] * frac1
    b = np.where(frac1 == 1.0, hi[gid], b)
    glen = hi - lo

    done_val = [[] for _ in range(ngroups)]
    done_err = [[] for _ in range(ngroups)]
    exhausted = False
    for round_ in range(max_rounds):
        val, err = _gk15(fun, a, b)
        if np.any(np.isnan(val)):
            raise FloatingPointError("integrand returned nan")
        est = np.bincount(gid, weights=np.nan_to_num(val, posinf=0.0), minlength=ngroups)
        for g in range(ngroups):
            est[g] += math.fsum(done_val[g])
        budget = np.maximum(atol, rtol * np.abs(est))
        local = budget[gid] * (b - a) / np.where(glen[gid] > 0, glen[gid], 1.0)
        tiny = (b - a) <= 1e-13 * np.maximum(1.0, np.abs(a))
        ok = (err <= local) | tiny | ~np.isfinite(val)
        if round_ == max_rounds - 1 or 2 * np.count_nonzero(~ok) > MAX_PANELS:
            exhausted = not np.all(ok)
            ok[:] = True
        for g, v, e in zip(gid[ok], val[ok], err[ok]):
            done_val[g].append(v)
            done_err[g].append(e)
        if np.all(ok):
            break
        a, b, gid = a[~ok], b[~ok], gid[~ok]
        m = 0.5 * (a + b)
        a, b, gid = np.concatenate([a, m]), np.concatenate([m, b]), np.concatenate([gid, gid])
        order = np.lexsort((a, gid))
        a, b, gid = a[order], b[order], gid[order]
    values = np.array([math.fsum(v) for v in done_val])
    errors = np.array([math.fsum(e) for e in done_err])
    return values, errors, exhausted


def adaptive_quad(fun: Callable, a: float, b: float, rtol: float = 1e-10,
                  atol: float = 0.0, pieces: int = 1) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod 7/15 quadrature of a vectorised ``fun`` on [a, b]."""
    if b == a:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    v, e, _ = _adaptive_groups(fun, [a], [b], rtol, atol, pieces)
    return sign * float(v[0]), float(e[0])


# --------------------------------------------------------------------------
# the Keller-Osserman integrand


def ko_integrand(g: NonlinearityExpr, m: int, zeta, *, return_flag: bool = False):
    """``g(zeta)^(-1/m) * zeta^(1/m - 1)`` for zeta > 0.

    Where ``g(zeta) == 0`` the value is ``+inf`` and the flag (with
    ``return_flag=True``) is set; handling that singularity is the caller's job.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise ValueError("ko_integrand needs zeta > 0")
    gz = evaluate(g, z)
    with np.errstate(divide="ignore"):
        out = np.where(gz > 0, np.power(np.where(gz > 0, gz, 1.0), -1.0 / m), np.inf) * z ** (1.0 / m - 1.0)
    if np.any(gz < 0):
        raise ValueError("ko_integrand needs g(zeta) >= 0")
    flag = bool(np.any(gz == 0))
    if np.ndim(zeta) == 0:
        out = float(out)
    return (out, flag) if return_flag else out


def _ko_log_h(g: NonlinearityExpr, m: int) -> Callable:
    """log of (ko integrand * zeta) as a function of s = ln zeta."""
    inv_m = 1.0 / m

    def log_h(s):
        sign, logg = log_evaluate(g, s)
        if np.any(sign < 0):
            raise ValueError("g must be non-negative on the integration range")
        logg = np.where(sign == 0, -np.inf, logg)
        return -inv_m * logg + inv_m * s

    return log_h


def _exp_of(log_h: Callable) -> Callable:
    def h(s):
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.exp(log_h(s))

    return h


# --------------------------------------------------------------------------
# block bookkeeping


@dataclass
class _Decision:
    status: Status
    tail: float = 0.0
    tail_err: float = 0.0
    reason: str = ""


class _BlockSeries:
    """Running analysis of block integrals I_0, I_1, ... of a positive integrand."""

    def __init__(self, tol: float, carried: float = 0.0, carried_err: float = 0.0):
        self.tol = tol
        self.blocks: list[float] = []
        self.errors: list[float] = []
        self.ratios: list[float] = []
        self.carried = carried
        self.carried_err = carried_err
        self.flat_run = 0

    def partial(self) -> float:
        return math.fsum([self.carried, *self.blocks])

    def quad_err(self) -> float:
        return math.fsum([self.carried_err, *self.errors])

    def push(self, value: float, err: float) -> _Decision | None:
        prev = self.blocks[-1] if self.blocks else None
        self.blocks.append(value)
        self.errors.append(err)
        if not math.isfinite(value) or self.partial() > DIVERGENCE_CEILING:
            return _Decision(Status.DIVERGED, reason="partial sum above ceiling")
        if prev is None:
            return None
        if prev > 0:
            ratio = value / prev
        else:
            ratio = 0.0 if value == 0 else math.inf
        self.ratios.append(ratio)

        if ratio >= RATIO_ONE and value >= DIVERGENCE_DELTA:
            self.flat_run += 1
        else:
            self.flat_run = 0
        if self.flat_run >= DIVERGENCE_BLOCKS:
            return _Decision(Status.DIVERGED,
                             reason=f"{DIVERGENCE_BLOCKS} consecutive blocks bounded below")
        if self._deficits_vanish(value):
            return _Decision(Status.DIVERGED,
                             reason="block ratios tend to 1 geometrically; blocks bounded below")

        if value == 0 and prev == 0 and self.partial() > 0:
            return _Decision(Status.CONVERGED, reason="integrand underflow")

        if len(self.ratios) >= RATIO_WINDOW:
            window = self.ratios[-RATIO_WINDOW:]
            rmax, rmin = max(window), min(window)
            if rmax < RATIO_MAX_CONVERGENT:
                tail, tail_err = self._extrapolate(value, window)
                total = self.partial() + tail
                if self.quad_err() + tail_err <= self.tol * abs(total):
                    return _Decision(Status.CONVERGED, tail, tail_err, "geometric tail")
        return None

    @staticmethod
    def _extrapolate(value: float, window: list[float]) -> tuple[float, float]:
        """Tail beyond the current block and its uncertainty.

        Later ratios are assumed to stay inside the window's range; when the
        ratios drift geometrically the range is narrowed to [last, limit]
        with the limit from the geometric drift.
        """
        def geo(r):
            return value * r / (1.0 - r)

        rmax, rmin = max(window), min(window)
        tail = 0.5 * (geo(rmax) + geo(rmin))
        err = geo(rmax) - geo(rmin)
        d = [window[i + 1] - window[i] for i in range(len(window) - 1)]
        if all(x != 0 for x in d) and all(x * d[0] > 0 for x in d):
            q = max(d[i + 1] / d[i] for i in range(len(d) - 1))
            if 0 < q <= DEFICIT_FACTOR:
                limit = window[-1] + d[-1] * q / (1.0 - q)
                if limit < 1.0:
                    a, b = geo(window[-1]), geo(limit)
                    aitken_err = 2.0 * abs(b - a)
                    if aitken_err < err:
                        tail, err = 0.5 * (a + b), aitken_err
        return tail, err + 1e-15 * abs(tail)

    def _deficits_vanish(self, value: float) -> bool:
        # d_j = 1 - rho_j > 0 shrinking by a factor <= q makes prod(rho) converge,
        # so every later block is >= value * (1 - d_j q / (1 - q)) > 0
        if len(self.ratios) < DIVERGENCE_BLOCKS:
            return False
        d = [1.0 - r for r in self.ratios[-DIVERGENCE_BLOCKS:]]
        if min(d) <= 0:
            return False
        q = max(d[i + 1] / d[i] for i in range(len(d) - 1))
        if q > DEFICIT_FACTOR:
            return False
        floor = value * (1.0 - d[-1] * q / (1.0 - q))
        return floor >= DIVERGENCE_DELTA

    def evidence(self) -> dict:
        return {
            "blocks": list(self.blocks),
            "partial_sums": list(np.cumsum(self.blocks) + self.carried),
            "ratios": list(self.ratios),
        }


@dataclass
class _TailResult:
    status: Status
    value: float
    error: float
    evidence: dict


def _tail(log_h: Callable, s0: float, direction: int, tol: float) -> _TailResult:
    """Integrate exp(log_h) over s from s0 to direction * infinity."""
    h = _exp_of(log_h)
    rtol_block = 0.1 * tol
    evidence: dict = {"direction": "+inf" if direction > 0 else "0"}

    # phase 1: dyadic blocks in zeta
    series = _BlockSeries(tol)
    decision = None
    batch = 16
    k = 0
    while decision is None and k < DYADIC_BLOCKS:
        ks = np.arange(k, k + batch)
        e0 = s0 + direction * ks * LN2
        e1 = s0 + direction * (ks + 1) * LN2
        lo, hi = np.minimum(e0, e1), np.maximum(e0, e1)
        vals, errs, exhausted = _adaptive_groups(h, lo, hi, rtol_block,
                                                 atol=0.01 * tol * series.partial())
        evidence["precision_exhausted"] = evidence.get("precision_exhausted", False) or exhausted
        for v, e in zip(vals, errs):
            decision = series.push(float(v), float(e))
            k += 1
            if decision is not None:
                break
    evidence["dyadic"] = series.evidence()
    evidence["dyadic_blocks_used"] = len(series.blocks)
    if decision is not None:
        return _finish(series, decision, evidence, phase="dyadic")

    # phase 2: doubling blocks in s
    start = abs(s0 + direction * DYADIC_BLOCKS * LN2)
    series2 = _BlockSeries(tol, carried=series.partial(), carried_err=series.quad_err())
    j = 0
    batch = 4
    while decision is None:
        js = np.arange(j, j + batch, dtype=float)
        e0 = start * 2.0**js
        e1 = start * 2.0 ** (js + 1)
        keep = e1 <= LOG_S_LIMIT
        if not np.any(keep):
            break
        e0, e1 = e0[keep], e1[keep]
        lo, hi = (e0, e1) if direction > 0 else (-e1, -e0)
        vals, errs, exhausted = _adaptive_groups(h, lo, hi, rtol_block, pieces=8,
                                                 atol=0.01 * tol * series2.partial())
        if exhausted:
            evidence["precision_exhausted"] = True
            decision = _Decision(Status.INCONCLUSIVE, reason="quadrature precision exhausted")
            break
        for v, e in zip(vals, errs):
            decision = series2.push(float(v), float(e))
            j += 1
            if decision is not None:
                break
    evidence["log_blocks"] = series2.evidence()
    evidence["log_blocks_used"] = len(series2.blocks)
    if decision is None:
        decision = _Decision(Status.INCONCLUSIVE, reason="block ratios did not settle before s ~ 1e300")
    return _finish(series2, decision, evidence, phase="log")


def _finish(series: _BlockSeries, decision: _Decision, evidence: dict, phase: str) -> _TailResult:
    evidence["decided_in"] = phase
    evidence["reason"] = decision.reason
    if decision.status is Status.CONVERGED:
        value = math.fsum([series.partial(), decision.tail])
        err = series.quad_err() + decision.tail_err
        evidence["tail_extrapolation"] = decision.tail
        return _TailResult(Status.CONVERGED, value, err, evidence)
    return _TailResult(decision.status, math.inf if decision.status is Status.DIVERGED else math.nan,
                       math.inf, evidence)


def _finite(log_h: Callable, s_lo: float, s_hi: float, tol: float) -> tuple[float, float, bool]:
    length = s_hi - s_lo
    pieces = int(min(max(math.ceil(length / LN2), 1), 4096))
    vals, errs, exhausted = _adaptive_groups(_exp_of(log_h), [s_lo], [s_hi], 0.1 * tol, pieces=pieces)
    return float(vals[0]), float(errs[0]), exhausted


def integrate_log(log_h: Callable, lower: float, upper: float, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Integrate ``exp(log_h(s))`` over ``s`` in ``[ln lower, ln upper]``.

    ``lower`` may be 0 and ``upper`` may be ``inf``; those ends go through the
    block analysis.  This is the engine behind :func:`improper_integral`.
    """
    if not (0 <= lower < upper):
        raise ValueError("need 0 <= lower < upper")
    pieces: list[tuple[str, _TailResult]] = []
    mid_lo = lower
    mid_hi = upper
    if lower == 0:
        anchor = min(upper, 1.0)
        pieces.append(("0", _tail(log_h, math.log(anchor), -1, tol)))
        mid_lo = anchor
    if math.isinf(upper):
        anchor = max(mid_lo, 1.0)
        pieces.append(("inf", _tail(log_h, math.log(anchor), +1, tol)))
        mid_hi = anchor
    if mid_hi > mid_lo:
        v, e, exhausted = _finite(log_h, math.log(mid_lo), math.log(mid_hi), tol)
        ev = {"precision_exhausted": exhausted}
        status = Status.CONVERGED if math.isfinite(v) else Status.DIVERGED
        pieces.append(("finite", _TailResult(status, v, e, ev)))

    evidence = {name: res.evidence for name, res in pieces}
    for name, res in pieces:
        if res.status is Status.DIVERGED:
            evidence["diverged_at"] = name
            return IntegralVerdict(Status.DIVERGED, None, math.inf, evidence)
    for name, res in pieces:
        if res.status is Status.INCONCLUSIVE:
            evidence["inconclusive_at"] = name
            return IntegralVerdict(Status.INCONCLUSIVE, None, math.inf, evidence)
    value = math.fsum(res.value for _, res in pieces)
    err = math.fsum(res.error for _, res in pieces)
    if err > tol * abs(value) and err > 0:
        evidence["note"] = "error bound above requested tolerance"
        return IntegralVerdict(Status.INCONCLUSIVE, None, err, evidence)
    return IntegralVerdict(Status.CONVERGED, value, err, evidence)


def improper_integral(g: NonlinearityExpr, m: int, lower: float, upper: float,
                      tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Verdict for ``int_lower^upper g^(-1/m)(z) z^(1/m-1) dz``.

    ``tol`` is relative: a Converged verdict has ``error_bound <= tol * value``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    return integrate_log(_ko_log_h(g, m), lower, upper, tol)


# --------------------------------------------------------------------------
# G(t) = int_t^inf ko_integrand


def big_G(g: NonlinearityExpr, m: int, t: float, tol: float = DEFAULT_TOL) -> float:
    """G(t); ``inf`` when the tail integral diverges."""
    if t <= 0:
        raise ValueError("t must be positive")
    verdict = improper_integral(g, m, t, math.inf, tol)
    if verdict.status is Status.DIVERGED:
        return math.inf
    if verdict.status is Status.INCONCLUSIVE:
        raise InconclusiveError(f"G({t:g}) is inconclusive", verdict)
    return verdict.value


def big_G_values(g: NonlinearityExpr, m: int, t_grid, tol: float = DEFAULT_TOL):
    """G on an arbitrary positive grid, by one tail integral plus segments.

    Returns ``(values, errors)`` in the order of ``t_grid``.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t grid must be positive")
    order = np.argsort(t)
    ts = t[order]
    log_h = _ko_log_h(g, m)
    top = improper_integral(g, m, ts[-1], math.inf, tol)
    if top.status is Status.DIVERGED:
        return np.full(t.shape, np.inf), np.full(t.shape, np.inf)
    if top.status is Status.INCONCLUSIVE:
        raise InconclusiveError(f"G({ts[-1]:g}) is inconclusive", top)
    s = np.log(ts)
    seg_lo, seg_hi = s[:-1], s[1:]
    nonempty = seg_hi > seg_lo
    seg_val = np.zeros(seg_lo.size)
    seg_err = np.zeros(seg_lo.size)
    if np.any(nonempty):
        pieces = np.clip(np.ceil((seg_hi - seg_lo)[nonempty] / LN2), 1, 4096).astype(int)
        v, e, _ = _adaptive_groups(_exp_of(log_h), seg_lo[nonempty], seg_hi[nonempty], 0.1 * tol,
                                   pieces=pieces)
        seg_val[nonempty] = v
        seg_err[nonempty] = e
    vals = np.empty(ts.size)
    errs = np.empty(ts.size)
    vals[-1], errs[-1] = top.value, top.error_bound
    # accumulate from the top in a fixed order
    for i in range(ts.size - 2, -1, -1):
        vals[i] = vals[i + 1] + seg_val[i]
        errs[i] = errs[i + 1] + seg_err[i]
    out_v = np.empty_like(vals)
    out_e = np.empty_like(errs)
    out_v[order] = vals
    out_e[order] = errs
    return out_v, out_e


@dataclass
class GTable:
    t_grid: np.ndarray
    G_values: np.ndarray
    m: int
    errors: np.ndarray
    blows_up_at_zero: bool | None
    zero_verdict: IntegralVerdict | None = None

    def is_nonincreasing(self) -> bool:
        v = self.G_values
        return bool(np.all(v[1:] <= v[:-1] * (1 + 1e-12)))

    def to_csv(self) -> str:
        lines = ["t,G"]
        for t, v in zip(self.t_grid, self.G_values):
            lines.append(f"{t:.17g},{v:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"m": self.m, "t": list(map(float, self.t_grid)), "G": list(map(float, self.G_values)),
                "G_to_infinity_at_zero": self.blows_up_at_zero}


def big_G_table(g: NonlinearityExpr, m: int, t_min: float, t_max: float, count: int,
                tol: float = DEFAULT_TOL, t_grid=None) -> GTable:
    """Log-spaced table of G plus a judgement on ``G(t) -> inf`` as ``t -> 0+``.

    The judgement is the verdict of ``int_0^t_min``: divergence there is the
    same statement as unbounded growth of G near zero.
    """
    if t_grid is None:
        if not 0 < t_min < t_max:
            raise ValueError("need 0 < t_min < t_max")
        t_grid = np.geomspace(t_min, t_max, count)
    t_grid = np.asarray(t_grid, dtype=float)
    vals, errs = big_G_values(g, m, t_grid, tol)
    near_zero = improper_integral(g, m, 0.0, float(np.min(t_grid)), tol)
    blows = {Status.DIVERGED: True, Status.CONVERGED: False}.get(near_zero.status)
    return GTable(t_grid, vals, m, errs, blows, near_zero)


# --------------------------------------------------------------------------
# classical Keller-Osserman integral, m = 2

# geometric panels in w = s - sigma for the inner integral
_W_EDGES = np.concatenate([[0.0], 2.0 ** np.arange(-40, 7)])


def _classical_log_h(g: NonlinearityExpr) -> Callable:
    """log of (int_1^zeta g)^(-1/2) * zeta, as a function of s = ln zeta >= 0.

    The inner integral is ``int_0^s exp(L(sigma)) d sigma`` with
    ``L = log g(e^sigma) + sigma``.  Because g is non-decreasing, ``L' >= 1``
    and the part of the inner integral below ``s - 64`` is at most
    ``e^-64 exp(L(s))``; it is dropped.
    """
    lo_w, hi_w = _W_EDGES[:-1], _W_EDGES[1:]

    def L(sig):
        sign, logg = log_evaluate(g, sig)
        if np.any(sign <= 0):
            raise ValueError("g must be positive on [1, inf) for the classical integral")
        return logg + sig

    def log_h(s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        if flat.size > 1024:
            return np.concatenate([log_h(flat[i:i + 1024]) for i in range(0, flat.size, 1024)]).reshape(s.shape)
        a = np.minimum(lo_w[None, :], flat[:, None])
        b = np.minimum(hi_w[None, :], flat[:, None])
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        w = c[..., None] + h[..., None] * XK
        sig = flat[:, None, None] - w
        Ls = L(flat)
        with np.errstate(under="ignore", invalid="ignore"):
            vals = np.exp(L(sig) - Ls[:, None, None])
        vals = np.where(h[..., None] > 0, vals, 0.0)
        rel = np.einsum("ijk,k,ij->i", vals, WK, h)
        with np.errstate(divide="ignore"):
            log_inner = Ls + np.log(rel)
        return (-0.5 * log_inner + flat).reshape(s.shape)

    return log_h


def classical_ko(g: NonlinearityExpr, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Verdict for ``int_1^inf (int_1^zeta g)^(-1/2) d zeta``."""
    log_h = _classical_log_h(g)

    # [1, 2]: integrable s^(-1/2) singularity at s = 0, removed by s = v^2
    def first(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            out = 2.0 * v * np.exp(log_h(v * v))
        return np.where(v > 0, out, 2.0 / math.sqrt(float(evaluate(g, 1.0))))

    head, head_err = adaptive_quad(first, 0.0, math.sqrt(LN2), rtol=0.1 * tol)
    tail = _tail(log_h, LN2, +1, tol)
    evidence = {"inf": tail.evidence, "head": head}
    if tail.status is not Status.CONVERGED:
        if tail.status is Status.DIVERGED:
            evidence["diverged_at"] = "inf"
        return IntegralVerdict(tail.status, None, math.inf, evidence)
    value = head + tail.value
    err = head_err + tail.error
    return IntegralVerdict(Status.CONVERGED, value, err, evidence)
