import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symbreak.modelzoo import (ArityError, ExprSyntaxError, ModelConfigError,
                               ModelValidationWarning, UnknownIdentifierError, builtin,
                               bundled_source, load_model, parse_expression, parse_model, pretty)
from symbreak.modelzoo.expr import evaluate, free_variables, value_and_grad
from symbreak.numkernel import fd_gradient

DEMO = "demos/models/oscillator.toml"


def test_parse_and_evaluate():
    ast = parse_expression("2*x^2 + sin(pi/2) - 3")
    assert evaluate(ast, {"x": 1.5}) == pytest.approx(2.5)
    assert free_variables(ast) == {"x"}
    assert evaluate(parse_expression("2**3**2"), {}) == 512
    assert evaluate(parse_expression("-x^2"), {"x": 3.0}) == -9.0


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expression("x_1 + (")
    assert err.value.pos == 6


def test_unknown_identifier_and_arity():
    with pytest.raises(UnknownIdentifierError):
        parse_expression("x + y", {"x"})
    with pytest.raises(ArityError):
        parse_expression("sin(x, x)")
    with pytest.raises(ExprSyntaxError):
        parse_expression("3 +* 4")


def test_dual_gradient():
    ast = parse_expression("x*y + exp(x) / sqrt(y)")
    val, grad = value_and_grad(ast, ["x", "y"], np.array([0.3, 2.0]))
    expect = [2.0 + np.exp(0.3) / np.sqrt(2.0), 0.3 - 0.5 * np.exp(0.3) * 2.0 ** -1.5]
    assert np.allclose(grad, expect, rtol=1e-14)


_atoms = st.sampled_from(["x", "y", "2", "0.5", "pi"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    kind = draw(st.sampled_from(["+", "-", "*", "/", "^", "neg", "sin", "cos"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "neg":
        return f"-({a})"
    if kind in ("sin", "cos"):
        return f"{kind}({a})"
    b = draw(expressions(depth=depth - 1))
    if kind == "^":
        b = draw(st.sampled_from(["2", "3"]))
    return f"({a}) {kind} ({b})"


@settings(max_examples=100, deadline=None)
@given(expressions())
def test_pretty_round_trip(text):
    ast = parse_expression(text)
    again = parse_expression(pretty(ast))
    env = {"x": 0.7, "y": 1.3}
    try:
        a, b = evaluate(ast, env), evaluate(again, env)
    except ZeroDivisionError:
        return
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name", ["pendulum", "oscillator", "oscillator-break"])
def test_sources_match_bundled(name):
    src = parse_model(bundled_source(name))
    ref = builtin(name).model
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = ref.sample(rng)
        eps = rng.uniform(0, 0.3)
        assert src.energy(eps, x) == pytest.approx(ref.energy(eps, x), abs=1e-12)
        assert np.allclose(src.grad(eps, x), ref.grad(eps, x), atol=1e-10)
        g = fd_gradient(lambda y: src.energy(eps, y), x)
        assert np.linalg.norm(src.grad(eps, x) - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_demo_model_loads():
    m = load_model(DEMO)
    assert m.n == 2 and m.dim == 4
    assert m.energy(0.0, [1, 1, 0, 0]) == pytest.approx(0.25)


def test_noncommuting_source_warns():
    text = bundled_source("oscillator").replace('J = ["(q1^2 + p1^2)/2", "(q2^2 + p2^2)/2"]',
                                                'J = ["(q1^2 + p1^2)/2", "q1"]')
    with pytest.warns(ModelValidationWarning, match="commuting"):
        m = parse_model(text)
    assert m.n == 2


def test_config_errors():
    with pytest.raises(ModelConfigError):
        parse_model("this is not toml = = =")
    with pytest.raises(ModelConfigError):
        parse_model("[chart]\ndim = 2\nnames=['q','p']\n")
    bad = bundled_source("oscillator").replace("eps*(q1*q2 + p1*p2)", "eps*(q1*q2 + zz)")
    with pytest.raises(UnknownIdentifierError):
        parse_model(bad)
    bad = bundled_source("oscillator").replace("eps*(q1*q2 + p1*p2)", "eps*(q1*q2 + (")
    with pytest.raises(ExprSyntaxError) as err:
        parse_model(bad)
    assert "hamiltonian.H" in str(err.value)


def test_builtin_unknown_name():
    with pytest.raises(KeyError):
        builtin("nope")
