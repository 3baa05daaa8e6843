import math

import numpy as np
import pytest
from scipy import integrate, special

from driftkit.errors import DomainError, PreconditionError
from driftkit.expr import ExprSyntaxError, parse
from driftkit.potential import HSpec, build_potential, integrate_reciprocal
from driftkit.special import EULER_GAMMA, exp_integral_e1


# expressions

@pytest.mark.parametrize("text, x, n, expected", [
    ("2*x + 1", 3.0, None, 7.0),
    ("x^2^0.5", 16.0, None, 16.0 ** (2.0 ** 0.5)),   # power is right-associative
    ("-x^2", 3.0, None, -9.0),
    ("ln(exp(x))", 1.7, None, 1.7),
    ("min(x, n, 4)", 9.0, 5.0, 4.0),
    ("max(x, n)", 2.0, 5.0, 5.0),
    ("ceil(x) / 2", 2.1, None, 1.5),
])
def test_expression_values(text, x, n, expected):
    assert parse(text)(x, n) == pytest.approx(expected, rel=1e-12)


def test_expression_vectorised_matches_scalar():
    expr = parse("exp(-1+x/n)*x/n")
    xs = np.linspace(1, 50, 7)
    vec = expr(xs, 50)
    assert vec.shape == xs.shape
    assert np.allclose(vec, [expr(float(x), 50) for x in xs], rtol=1e-14, atol=0)


@pytest.mark.parametrize("text", ["2*", "foo(x)", "x + y", "(x", "ln(x, 2)", "min(x)", "3 $ x"])
def test_expression_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


# h specifications

def test_nonpositive_h_rejected_with_witness():
    with pytest.raises(PreconditionError) as info:
        HSpec.expression("x - 3", 1.0, 10.0)
    assert info.value.witness is not None
    assert info.value.witness <= 3.0


def test_h_outside_domain_raises():
    h = HSpec.expression("x", 1.0, 10.0)
    with pytest.raises(DomainError):
        h(11.0)


def test_table_uses_ceiling():
    h = HSpec.from_table({1: 0.5, 2: 0.25})
    assert h(1.5) == 0.25
    assert h(2.0) == 0.25
    assert h(1.0) == 0.5


def test_monotone_witness_found_for_decreasing_h():
    assert HSpec.expression("1/x", 1.0, 5.0).monotone_witness() is not None
    assert HSpec.expression("x", 1.0, 5.0).monotone_witness() is None


# integral of 1/h

def test_integral_multiplicative_is_log():
    h = HSpec.multiplicative(1.0, x_min=1.0)
    assert integrate_reciprocal(h, 1.0, math.e) == pytest.approx(1.0, abs=1e-9)


def test_integral_empty_interval():
    assert integrate_reciprocal(HSpec.expression("x^2", 1.0, 10.0), 3.0, 3.0) == 0.0


def test_integral_integer_table_prefix_sum():
    h = HSpec.from_table({1: 0.5, 2: 0.25})
    assert integrate_reciprocal(h, 1.0, 2.0) == 4.0


def test_integral_quadrature_against_scipy():
    text = "exp(-1+x/100)*x/100*(1-1/100)"
    h = HSpec.expression(text, 1.0, 100.0)
    expr = parse(text)
    expected, _ = integrate.quad(lambda x: 1.0 / expr(x), 1.0, 50.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert integrate_reciprocal(h, 1.0, 50.0) == pytest.approx(expected, rel=1e-8)


def test_integral_rejects_reversed_bounds():
    with pytest.raises(DomainError):
        integrate_reciprocal(HSpec.constant(1.0), 3.0, 2.0)


# potential g

def test_potential_constant_is_linear():
    g = build_potential(HSpec.constant(0.5))
    assert g(0) == 0.0
    assert g(7.0) == pytest.approx(14.0, rel=1e-15)


def test_potential_multiplicative_closed_form():
    g = build_potential(HSpec.multiplicative(0.1, x_min=1.0))
    assert g(1.0) == pytest.approx(10.0, rel=1e-14)
    assert g(math.e) == pytest.approx(20.0, rel=1e-14)


def test_potential_quadrature_closed_form():
    # h = x^2 on [1, 10]: g(x) = 1 + (1 - 1/x)
    g = build_potential(HSpec.expression("x^2", 1.0, 10.0))
    for x in (1.0, 2.0, 4.5, 10.0):
        assert g(x) == pytest.approx(2.0 - 1.0 / x, rel=1e-9)


def test_potential_table():
    g = build_potential(HSpec.from_table({1: 0.5, 2: 0.25}))
    assert g(1.0) == pytest.approx(2.0)
    assert g(2.0) == pytest.approx(6.0)
    assert g(1.5) == pytest.approx(4.0)


def test_potential_gap_and_range_errors():
    g = build_potential(HSpec.expression("x", 1.0, 10.0))
    assert g(0) == 0.0
    with pytest.raises(DomainError):
        g(0.5)
    with pytest.raises(DomainError):
        g(-1.0)
    with pytest.raises(DomainError):
        g(11.0)


def test_potential_values_matches_pointwise():
    g = build_potential(HSpec.expression("1 + x/3", 1.0, 20.0))
    xs = np.array([0.0, 20.0, 3.0, 1.0, 7.5])
    assert np.allclose(g.values(xs), [g(x) for x in xs], rtol=1e-9)


# exponential integral

def test_e1_reference_values():
    assert exp_integral_e1(0.5) == pytest.approx(0.559774, abs=1e-6)
    assert exp_integral_e1(1.0) == pytest.approx(0.219384, abs=1e-5)


@pytest.mark.parametrize("x", [1e-6, 0.1, 0.9, 1.0, 1.1, 3.0, 20.0, 200.0])
def test_e1_against_scipy(x):
    assert exp_integral_e1(x) == pytest.approx(float(special.exp1(x)), rel=1e-12)


def test_e1_small_argument_limit():
    x = 1e-8
    assert abs(exp_integral_e1(x) + math.log(x) + EULER_GAMMA) < 1e-7


@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_e1_domain(x):
    with pytest.raises(DomainError):
        exp_integral_e1(x)
