import itertools
import math

import numpy as np
import pytest

from liouville.conditions import (
    Outcome, ProblemSpec, check_T211, check_T221, check_T231, classify, decay_curve,
    g_inverse_of_G, mean_bound, remark22_equivalence,
)
from liouville.nonlinearity import parse, scaled
from liouville.quadrature import Status, big_G


def spec(source, m, n):
    return ProblemSpec(m, n, parse(source))


@pytest.mark.parametrize("bad", [dict(m=0, n=3), dict(m=2, n=0), dict(m=2, n=3, A=0.0)])
def test_problem_spec_guards(bad):
    with pytest.raises(ValueError):
        ProblemSpec(g=parse("zeta^2"), **bad)


@pytest.mark.parametrize("source, m, status", [
    ("zeta^2", 2, Status.CONVERGED),
    ("zeta", 3, Status.DIVERGED),
    ("zeta*ln(2+zeta)^3", 2, Status.CONVERGED),
])
def test_tail_condition(source, m, status):
    assert check_T211(spec(source, m, 3)).status is status


@pytest.mark.parametrize("source, m, status", [
    ("1+zeta^2", 1, Status.CONVERGED),
    ("zeta^2", 1, Status.DIVERGED),
    ("zeta^3", 2, Status.DIVERGED),
])
def test_whole_line_condition(source, m, status):
    v = check_T231(spec(source, m, 3))
    assert v.status is status
    if v.converged:
        assert v.evidence["g_at_zero_positive"]


def test_liminf_boundary_is_satisfied():
    d = check_T221(spec("zeta^3", 2, 3))
    assert d.decision == "satisfied"
    np.testing.assert_allclose(d.values, 1.0, rtol=1e-8)
    assert np.all(np.diff(d.t_samples) < 0)


def test_liminf_violated():
    d = check_T221(spec("zeta^4", 2, 3))
    assert d.decision == "violated"
    # closed form (2/3) t^(-1/2)
    np.testing.assert_allclose(d.values, (2 / 3) * d.t_samples ** -0.5, rtol=1e-7)
    assert d.fitted_exponent == pytest.approx(-0.5, abs=1e-6)


@pytest.mark.parametrize("source", ["zeta^1.1", "zeta^6", "zeta*ln(2+zeta)^9"])
@pytest.mark.parametrize("m, n", [(2, 2), (4, 3), (4, 1)])
def test_liminf_shortcut_when_m_ge_n(source, m, n):
    assert check_T221(spec(source, m, n)).decision == "satisfied"


def test_liminf_trivially_violated_when_G_infinite():
    assert check_T221(spec("zeta", 2, 3)).decision == "violated"


@pytest.mark.parametrize("source, m, n, outcome", [
    ("zeta^2", 2, 3, Outcome.ONLY_TRIVIAL_SOLUTIONS),
    ("zeta^4", 2, 3, Outcome.BOUND_ONLY),
    ("zeta*ln(2+zeta)^2", 2, 5, Outcome.INCONCLUSIVE),
    ("1+zeta^2", 1, 3, Outcome.NO_GLOBAL_SOLUTIONS),
    ("zeta", 2, 1, Outcome.INCONCLUSIVE),
])
def test_classify_examples(source, m, n, outcome):
    assert classify(spec(source, m, n)).outcome is outcome


def _routing_consistent(v, m, n):
    ev = v.evidence
    if v.outcome is Outcome.NO_GLOBAL_SOLUTIONS:
        return ev["t231"].converged
    if v.outcome is Outcome.ONLY_TRIVIAL_SOLUTIONS:
        return ev["t211"].converged and (m >= n or ev["t221"].decision == "satisfied")
    if v.outcome is Outcome.BOUND_ONLY:
        return ev["t211"].converged and ev["t221"].decision == "violated" and m < n
    return True


POWER_GRID = list(itertools.product([1.1, 1.5, 2, 3, 4, 6], [1, 2, 4], [1, 2, 3, 5, 8]))


@pytest.mark.parametrize("lam, m, n", POWER_GRID)
def test_power_law_rule(lam, m, n):
    v = classify(spec(f"zeta^{lam}", m, n))
    assert _routing_consistent(v, m, n)
    expected = lam > 1 and lam * (n - m) <= n
    if abs(lam * (n - m) - n) < 0.05 * n and v.outcome is Outcome.INCONCLUSIVE:
        return
    assert (v.outcome is Outcome.ONLY_TRIVIAL_SOLUTIONS) is expected


@pytest.mark.parametrize("m", [2, 4])
@pytest.mark.parametrize("offset", [-1, 0, 0.5, 2])
def test_log_power_rule(m, offset):
    nu = m + offset
    for n in range(1, m + 3):
        v = classify(spec(f"zeta*ln(2+zeta)^{nu}", m, n))
        assert _routing_consistent(v, m, n)
        assert (v.outcome is Outcome.ONLY_TRIVIAL_SOLUTIONS) is (nu > m)


@pytest.mark.parametrize("c", [1e-3, 1e3])
@pytest.mark.parametrize("source, m, n", [("zeta^2", 2, 3), ("zeta^4", 2, 3),
                                          ("1+zeta^2", 1, 2), ("zeta*ln(2+zeta)^2", 2, 5)])
def test_classify_scale_invariant(source, m, n, c):
    g = parse(source)
    a = classify(ProblemSpec(m, n, g)).outcome
    b = classify(ProblemSpec(m, n, scaled(g, c))).outcome
    assert a is b


def test_verdict_json_fields():
    doc = classify(spec("zeta^2", 2, 3)).to_dict()
    assert list(doc) == ["outcome", "theorems", "evidence"]
    assert set(doc["evidence"]) == {"t211", "t221", "t231"}


@pytest.mark.parametrize("source, status", [
    ("zeta^2", Status.CONVERGED),
    ("zeta", Status.DIVERGED),
    ("zeta*ln(2+zeta)^2", Status.DIVERGED),
])
def test_keller_osserman_equivalence(source, status):
    rep = remark22_equivalence(parse(source))
    assert rep["agree"]
    assert rep["tail_condition"].status is status


@pytest.mark.parametrize("source, r, expected", [("zeta^3", 4.0, 0.25), ("zeta^2", 2.0, 1.0)])
def test_inverse_closed_forms(source, r, expected):
    assert g_inverse_of_G(spec(source, 2, 3), r) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("source, m", [("zeta^1.1", 4), ("zeta*ln(2+zeta)^6", 2), ("exp(zeta)-1", 2)])
@pytest.mark.parametrize("r", [1e-2, 1.0, 1e2])
def test_inverse_identity(source, m, r):
    s = spec(source, m, 3)
    assert big_G(s.g, m, g_inverse_of_G(s, r)) == pytest.approx(r, rel=1e-6)


def test_inverse_undefined_above_sup():
    with pytest.raises(ValueError, match="inverse undefined"):
        g_inverse_of_G(spec("1+zeta^2", 2, 3), 10.0)


def test_inverse_needs_finite_G():
    with pytest.raises(ValueError):
        g_inverse_of_G(spec("zeta", 2, 3), 1.0)


def test_mean_bound_examples():
    s3, s2 = spec("zeta^3", 2, 3), spec("zeta^2", 2, 3)
    assert mean_bound(s3, 10.0) == pytest.approx(0.1, rel=1e-8)
    assert mean_bound(s3, 10.0, C=2.0) == pytest.approx(2 * mean_bound(s3, 10.0), rel=1e-12)
    assert mean_bound(s2, 1.0, C=1.0, k=2.0) == pytest.approx(1.0, rel=1e-8)


def test_decay_curve_examples():
    t = decay_curve(spec("zeta^3", 2, 3), [1, 10, 100], epsilon=0.05)
    np.testing.assert_allclose(t.bound, [1, 0.1, 0.01], rtol=1e-8)
    assert t.strictly_decreasing and t.below_epsilon
    np.testing.assert_allclose(decay_curve(spec("zeta^2", 2, 3), [1, 2]).bound, [4, 1], rtol=1e-8)


def test_decay_curve_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        decay_curve(spec("zeta^3", 2, 3), [2, 1])
