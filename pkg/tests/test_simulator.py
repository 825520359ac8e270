import math

import numpy as np
import pytest
from hypothesis import given, seed, settings, strategies as st
from scipy.special import beta

from liouville.conditions import ProblemSpec
from liouville.nonlinearity import EvaluationError, parse
from liouville.simulator import (
    Jet, ProfileStatus, apply_polyharmonic, integrate_radial, jet_eval, radial_laplacian,
    verify_counterexample,
)

# 1-D energy identity for u'' = u^2, u(0) = 1, u'(0) = 0:
# R = sqrt(3/2) int_1^inf (u^3 - 1)^(-1/2) du = sqrt(3/2) B(1/2, 1/6) / 3
R_1D = math.sqrt(1.5) * beta(0.5, 1 / 6) / 3


@pytest.mark.parametrize("source, r, order, expected", [
    ("r^2", 3.0, 2, [9.0, 6.0, 2.0]),
    ("sqrt(1+r^2)", 0.0, 2, [1.0, 0.0, 1.0]),
    ("exp(r)", 1.0, 3, [math.e] * 4),
    ("ln(1+r)", 0.0, 4, [0.0, 1.0, -1.0, 2.0, -6.0]),
    ("r^3 + 2*r", 1.0, 4, [3.0, 5.0, 6.0, 6.0, 0.0]),
])
def test_jet_eval(source, r, order, expected):
    np.testing.assert_allclose(jet_eval(source, r, order).derivs, expected, rtol=1e-14, atol=1e-14)


def test_jet_division_and_power():
    x = Jet.variable(2.0, 5)
    np.testing.assert_allclose((x * x / x).coeffs, x.coeffs, atol=1e-15)
    np.testing.assert_allclose((x ** -1.0).derivs[:3], [0.5, -0.25, 0.25], rtol=1e-14)
    np.testing.assert_allclose(((x ** 2.0).log()).coeffs, (2.0 * x.log()).coeffs, rtol=1e-14)


def test_jet_domain_errors():
    with pytest.raises(EvaluationError):
        jet_eval("ln(r - 1)", 0.5, 2)
    with pytest.raises(EvaluationError):
        jet_eval("r^0.5", 0.0, 2)


@pytest.mark.parametrize("source, half_m, r, expected", [
    ("r^2", 1, 0.7, 6.0),
    ("r^2", 1, 0.0, 6.0),
    ("r^4", 2, 1.3, 120.0),
    ("r^4", 2, 0.0, 120.0),
    ("r^2", 2, 2.0, 0.0),
])
def test_polyharmonic_examples(source, half_m, r, expected):
    assert apply_polyharmonic(source, 3, half_m, r) == pytest.approx(expected, abs=1e-12)


def test_polyharmonic_needs_order():
    with pytest.raises(ValueError):
        apply_polyharmonic(jet_eval("r^4", 1.0, 3), 3, 2, 1.0)


def test_laplacian_of_sinh_over_r():
    # Delta (sinh r / r) = sinh r / r in three dimensions
    f = lambda r, order: jet_eval("exp(r) + (-1)*exp(-1*r)", r, order) / (2 * Jet.variable(r, order))
    for r in (0.5, 1.0, 3.0):
        assert apply_polyharmonic(f, 3, 1, r) == pytest.approx(math.sinh(r) / r, rel=1e-12)


def test_origin_needs_even_profile():
    with pytest.raises(ValueError):
        radial_laplacian(jet_eval("r", 0.0, 2), 0.0, 3)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 4.0])
def test_linear_equation_oracle(r):
    p = integrate_radial(ProblemSpec(2, 3, parse("zeta")), 1.0, 5.0)
    assert p.status is ProfileStatus.GLOBAL
    assert p(r) == pytest.approx(math.sinh(r) / r, rel=1e-6)


def test_sinh_value_at_two():
    p = integrate_radial(ProblemSpec(2, 3, parse("zeta")), 1.0, 5.0)
    assert p(2.0) == pytest.approx(1.8134302039235093, rel=1e-9)


def test_one_dimensional_blowup_radius():
    p = integrate_radial(ProblemSpec(2, 1, parse("zeta^2")), 1.0, 10.0)
    assert p.status is ProfileStatus.BLOW_UP
    assert p.blowup_radius == pytest.approx(R_1D, abs=1e-4)
    lo, hi = p.bracket
    assert lo <= p.blowup_radius <= hi and hi - lo <= 1e-6


def test_zero_data_stays_zero():
    p = integrate_radial(ProblemSpec(2, 3, parse("zeta^2")), 0.0, 5.0)
    assert p.status is ProfileStatus.GLOBAL
    assert np.all(p.values == 0.0)


def test_blowup_radius_monotone_in_u0():
    radii = [integrate_radial(ProblemSpec(2, 3, parse("zeta^2")), u0, 50.0).blowup_radius
             for u0 in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b for a, b in zip(radii, radii[1:]))


def test_blowup_radius_scaling_law():
    # u -> lambda^2 u(lambda r) maps solutions of Delta u = u^2 to solutions
    r1 = integrate_radial(ProblemSpec(2, 3, parse("zeta^2")), 1.0, 50.0).blowup_radius
    r4 = integrate_radial(ProblemSpec(2, 3, parse("zeta^2")), 4.0, 50.0).blowup_radius
    assert r4 == pytest.approx(r1 / 2, rel=1e-8)


def test_odd_m_rejected():
    with pytest.raises(ValueError):
        integrate_radial(ProblemSpec(3, 3, parse("zeta^2")), 1.0, 5.0)


def test_biharmonic_cascade_consistency():
    p = integrate_radial(ProblemSpec(4, 3, parse("zeta^2")), 1.0, 50.0, initial=[0.5])
    assert p.status is ProfileStatus.BLOW_UP
    n, h = 3, 1e-4
    for r in (0.5, 1.0, 0.5 * p.blowup_radius):
        st_m, st_0, st_p = p.state([r - h, r, r + h]).T
        # Delta v_0 from the stored v_0' by a central difference of v_0'
        lap = (st_p[1] - st_m[1]) / (2 * h) + (n - 1) * st_0[1] / r
        assert lap == pytest.approx(st_0[2], rel=1e-6)


def test_grid_refinement_stability():
    spec = ProblemSpec(2, 3, parse("zeta^2"))
    a = integrate_radial(spec, 1.0, 50.0, rtol=1e-10)
    b = integrate_radial(spec, 1.0, 50.0, rtol=5e-11)
    for r in (0.5, 1.0, 2.0, 3.0):
        assert abs(a(r) - b(r)) < 10 * 1e-10 * abs(a(r)) + 1e-12


def test_profile_serialisation():
    p = integrate_radial(ProblemSpec(4, 3, parse("zeta")), 1.0, 2.0)
    lines = p.to_csv().splitlines()
    assert lines[0] == "r,u,v_1"
    assert len(lines) == p.grid.size + 1
    assert p.header()["status"] == "Global"


def test_counterexample_passes_with_auto_k():
    rep = verify_counterexample(1, 3, 2.0, 1.0, "auto")
    assert rep.passed and rep.min_scaled_residual >= 0
    assert 1.0 < rep.k <= 2 ** 20
    assert rep.certified_range[1] > 5.0
    assert len(rep.fd_check) == 3
    assert max(f["rel_err"] for f in rep.fd_check) < 1e-5


@pytest.mark.parametrize("k", [1.0, 1.5, 2.0, 4.0])
def test_counterexample_fails_above_critical_nu(k):
    assert not verify_counterexample(1, 3, 3.0, 1.0, k).passed


def test_counterexample_linear_case():
    assert verify_counterexample(1, 3, 0.0, 1.0, 1.0).passed


def test_counterexample_empty_range_for_huge_k():
    rep = verify_counterexample(1, 3, 2.0, 1.0, 64.0)
    assert not rep.passed and rep.certified_range == (0.0, 0.0)


# ---------------------------------------------------------------- properties

PROFILES = ["exp(r)", "sqrt(1+r^2)", "ln(2+r)", "r^3 + r", "exp(0.3*sqrt(1+r^2))",
            "(1+r)^2.5", "r*exp(-1*r)", "ln(1+r^2)^2"]


@seed(3)
@settings(max_examples=200)
@given(st.sampled_from(PROFILES), st.floats(0.2, 4.0))
def test_jet_matches_finite_differences(source, r):
    expr = parse(source, variable="r")
    h = 1e-4 * (1 + abs(r))
    jet = jet_eval(expr, r, 4).derivs
    lo = jet_eval(expr, r - h, 4).derivs
    hi = jet_eval(expr, r + h, 4).derivs
    # order k against a central difference of order k - 1, k = 1..4
    fd = (hi[:-1] - lo[:-1]) / (2 * h)
    np.testing.assert_allclose(fd, jet[1:], rtol=1e-5, atol=1e-5 * (1 + abs(jet[0])))
    # plain function values for the first two derivatives
    f0, fm, fp = jet[0], lo[0], hi[0]
    assert (fp - fm) / (2 * h) == pytest.approx(jet[1], rel=1e-5, abs=1e-6)
    assert (fp - 2 * f0 + fm) / h ** 2 == pytest.approx(jet[2], rel=1e-5, abs=1e-5 * (1 + abs(f0)))
