import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffeoflow import DescriptorError, parse_scalar, parse_vector
from diffeoflow.descriptors import evaluate_on


def ev(text, **env):
    return float(parse_scalar(text).evaluate({k: np.float64(v) for k, v in env.items()}))


def test_arithmetic_and_precedence():
    assert ev("2*x + 3", x=2.0) == 7.0
    assert ev("2 + 3*4^2") == 50.0
    assert ev("(x+1)/(x-3)", x=1.0) == -1.0
    assert ev("-x^2", x=2.0) == -4.0
    assert ev("+x - -x", x=1.5) == 3.0


def test_double_star_is_a_power_synonym():
    assert ev("x**3", x=2.0) == ev("x^3", x=2.0) == 8.0
    assert ev("(1+x^2)^-1", x=3.0) == pytest.approx(0.1, abs=1e-15)
    assert ev("1/(1+x**2)", x=3.0) == pytest.approx(0.1, abs=1e-15)


def test_whitelisted_functions():
    assert ev("exp(1)") == pytest.approx(math.e, abs=1e-15)
    assert ev("sin(x)+cos(x)", x=0.0) == 1.0
    assert ev("tanh(100)") == pytest.approx(1.0, abs=1e-12)
    assert ev("gauss(x)", x=1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert ev("gauss(x, 2*x)", x=0.5) == pytest.approx(math.exp(-1.25), abs=1e-15)


def test_bump_is_compactly_supported():
    assert ev("bump(x)", x=0.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert ev("bump(x)", x=1.0) == 0.0
    assert ev("bump(x)", x=-2.5) == 0.0
    assert ev("bump(x/2)", x=1.9) > 0.0
    assert ev("bump(x/2)", x=2.0) == 0.0
    # derivatives stay flat across the support boundary
    d = parse_scalar("bump(x)").diff("x")
    assert float(d.evaluate({"x": np.float64(1.0)})) == 0.0
    assert abs(float(d.evaluate({"x": np.float64(0.999)}))) < 1e-5


@pytest.mark.parametrize("text", [
    "exp(-x^2)",
    "sin(3*x)*cos(x)",
    "tanh(x/2)",
    "x^3 - 2*x",
    "gauss(x-1)",
    "bump(x/3)",
    "1/(1+x^2)",
    "exp(-x^2)*sin(x)/(2+cos(x))",
])
def test_symbolic_derivative_matches_finite_difference(text):
    expr = parse_scalar(text)
    d = expr.diff("x")
    h = 1e-5
    for x0 in (-1.3, -0.2, 0.7, 2.1):
        plus = float(expr.evaluate({"x": np.float64(x0 + h)}))
        minus = float(expr.evaluate({"x": np.float64(x0 - h)}))
        fd = (plus - minus) / (2.0 * h)
        exact = float(d.evaluate({"x": np.float64(x0)}))
        assert abs(fd - exact) <= 1e-6 * (1.0 + abs(exact))


def test_diff_of_unused_variable_is_zero():
    d = parse_scalar("exp(-x^2)").diff("t")
    assert float(d.evaluate({"x": np.float64(0.3)})) == 0.0


def test_free_vars():
    assert parse_scalar("exp(-x^2)*cos(t)").free_vars() == {"x", "t"}
    assert parse_scalar("1.5").free_vars() == set()


def test_parse_vector_components():
    comps = parse_vector("-0.3*y, 0.3*x")
    assert len(comps) == 2
    assert float(comps[0].evaluate({"x": np.float64(0), "y": np.float64(2)})) == -0.6
    assert len(parse_vector("x")) == 1


def test_evaluate_on_broadcasts_constants():
    values = evaluate_on(parse_scalar("2.5"), {"x": np.linspace(-1, 1, 7)})
    assert values.shape == (7,)
    assert np.all(values == 2.5)


@pytest.mark.parametrize("text", [
    "sinh(x)",          # unknown function
    "w + 1",            # unknown variable
    "x^2.5",            # non-integer exponent
    "x^",               # missing exponent
    "x 1",              # trailing input
    "x $",              # unexpected character
    "",                 # empty
    "(x+1",             # unbalanced parenthesis
    "exp(x, y)",        # arity
    "gauss(x, y, z, t)",
    "bump()",
    "1..2",
])
def test_parse_errors(text):
    with pytest.raises(DescriptorError):
        parse_scalar(text)


def test_unbound_variable_at_evaluation():
    with pytest.raises(DescriptorError):
        parse_scalar("x + t").evaluate({"x": np.float64(0.0)})


@given(st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=-3.0, max_value=3.0))
def test_product_rule_property(x0, a):
    # d/dx [a x sin(x)] = a sin(x) + a x cos(x)
    expr = parse_scalar(f"({a}) * x * sin(x)")
    got = float(expr.diff("x").evaluate({"x": np.float64(x0)}))
    want = a * math.sin(x0) + a * x0 * math.cos(x0)
    assert abs(got - want) <= 1e-12 * (1.0 + abs(want))
