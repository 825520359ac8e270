import math

import numpy as np
import pytest
from hypothesis import given, seed, settings, strategies as st

from liouville.nonlinearity import (
    Const, EvaluationError, Ln, ParseError, Power, Product, Sum, Var,
    check_admissible, evaluate, parse, render, scaled, substitute,
)


def test_power_is_single_node():
    assert parse("zeta^2").root == Power(Var(), 2.0)


def test_log_power_tree():
    # c0 u ln^nu(2+u) with c0 = 1, nu = 2
    expr = parse("zeta * ln(2+zeta)^2")
    assert expr.root == Product((Var(), Power(Ln(Sum((Const(2.0), Var()))), 2.0)))


@pytest.mark.parametrize("source, offset", [("zeta +", 6), ("zeta^", 5), ("(zeta", 5)])
def test_syntax_error_offset(source, offset):
    with pytest.raises(ParseError) as info:
        parse(source)
    assert info.value.offset == offset


@pytest.mark.parametrize("source", ["zeta + x", "foo(zeta)", "zeta ^ zeta", "2 ** zeta"])
def test_rejects_unknown_forms(source):
    with pytest.raises(ParseError):
        parse(source)


def test_precedence_and_associativity():
    assert evaluate(parse("1 + 2*zeta^2"), 3.0) == 19.0
    assert evaluate(parse("2^3^2"), 0.0) == 512.0
    assert evaluate(parse("-zeta^2 + 10"), 3.0) == 1.0


def test_warning_for_fractional_power_of_signed_base():
    assert parse("(zeta - 1)^0.5").warnings
    assert not parse("(1 + zeta)^0.5").warnings


@pytest.mark.parametrize("source, zeta, expected", [
    ("zeta^2", 3.0, 9.0),
    ("zeta*ln(2+zeta)^2", 0.0, 0.0),
    ("zeta^3", 4.0, 64.0),
    ("exp(zeta) + sqrt(zeta)", 4.0, math.exp(4.0) + 2.0),
])
def test_evaluate_examples(source, zeta, expected):
    assert evaluate(parse(source), zeta) == pytest.approx(expected, rel=1e-15)


def test_overflow_saturates_with_flag():
    value, flag = evaluate(parse("exp(zeta)"), 1000.0, return_flag=True)
    assert value == math.inf and flag


def test_domain_errors():
    with pytest.raises(EvaluationError):
        evaluate(parse("ln(zeta - 1)"), 0.5)
    with pytest.raises((EvaluationError, ValueError)):
        evaluate(parse("zeta"), -1.0)


def test_substitute_and_scale():
    g = parse("zeta^3")
    half = substitute(g, Product((Const(0.5), Var())))
    assert evaluate(half, 4.0) == 8.0
    assert evaluate(scaled(g, 10.0), 2.0) == 80.0


def test_admissible_power():
    rep = check_admissible(parse("zeta^2"))
    assert rep.ok
    assert rep.checked_range == (0.0, 1e8)


def test_log_fails_convexity_with_genuine_witness():
    g = parse("ln(1+zeta)")
    rep = check_admissible(g)
    assert rep.nondecreasing.passed and not rep.convex.passed
    a, mid, b = rep.convex.witness
    assert mid == pytest.approx(0.5 * (a + b))
    # brute-force second difference at the witness is negative
    assert math.log1p(mid) > 0.5 * (math.log1p(a) + math.log1p(b))
    # and near zeta = 1 as well
    assert math.log1p(1.0) > 0.5 * (math.log1p(0.5) + math.log1p(1.5))


def test_positivity_failure():
    g = parse("zeta^2 - 1")
    rep = check_admissible(g)
    assert not rep.positive_on_positive.passed
    (w,) = rep.positive_on_positive.witness
    assert evaluate(g, w) <= 0 and evaluate(g, 0.5) < 0


def test_monotonicity_failure_witness():
    rep = check_admissible(parse("(zeta - 1)^2"))
    assert not rep.nondecreasing.passed
    a, b = rep.nondecreasing.witness
    assert a < b <= 1.0


# ---------------------------------------------------------------- properties

_atoms = st.sampled_from(["zeta", "2", "0.5", "(1+zeta)", "ln(2+zeta)", "exp(zeta)",
                          "sqrt(zeta)", "zeta^2.5", "(3*zeta)"])


@st.composite
def expressions(draw, depth=0):
    if depth > 2 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "*", "^", "ln", "sqrt"]))
    left = draw(expressions(depth + 1))
    if op == "ln":
        return f"ln(1+{left})"
    if op == "sqrt":
        return f"sqrt({left})"
    if op == "^":
        return f"({left})^{draw(st.sampled_from(['2', '0.5', '1.5']))}"
    right = draw(expressions(depth + 1))
    return f"({left}){op}({right})"


@seed(20261018)
@settings(max_examples=200)
@given(expressions())
def test_render_round_trip(source):
    expr = parse(source)
    assert parse(render(expr)) == expr


@seed(20261019)
@settings(max_examples=200)
@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1e6))
def test_scaling_is_exact(c, zeta):
    g = parse("zeta*ln(2+zeta)^3 + zeta^2")
    assert evaluate(scaled(g, c), zeta) == pytest.approx(c * evaluate(g, zeta), rel=1e-15)


@seed(20261020)
@settings(max_examples=200)
@given(st.sampled_from(["zeta^2", "zeta*ln(2+zeta)^2", "1+zeta^2", "exp(zeta)-1"]),
       st.floats(0, 50), st.floats(0, 50))
def test_monotone_on_admissible(source, z1, z2):
    g = parse(source)
    assert check_admissible(g).nondecreasing.passed
    lo, hi = sorted((z1, z2))
    assert evaluate(g, lo) <= evaluate(g, hi) * (1 + 1e-12) + 1e-300
