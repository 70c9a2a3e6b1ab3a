import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from jacobilie.expr import (Add, Const, DomainError, ExpInt1, Mul, ParseError, SamplingBox,
                            UnboundNameError, UnknownIdentifierError, add, diff, ei1, evaluate,
                            evaluate_many, exp, exp_int1, expand, is_zero, ln, mul, param,
                            parse, render, sin, subs, var)

X, Y, Z = var("x"), var("y"), var("z")
B = param("b")


def P(text, coords=("x", "y", "z"), params=("b",)):
    return parse(text, coords, params)


# -- parsing ----------------------------------------------------------------------------

def test_parse_catalog_component_tree():
    e = P("1 - exp(-(b+1)*y)")
    assert isinstance(e, Add)
    assert e.terms[0] == Const(1)
    neg = e.terms[1]
    assert isinstance(neg, Mul) and Const(-1) in neg.factors
    inner = [f for f in neg.factors if f is not Const(-1)][0]
    assert inner == exp(mul(-1, add(B, 1), Y))


def test_parse_zero_is_constant():
    assert P("0") is Const(0)


def test_parse_ei1_node():
    e = P("Ei1(-b*(y+z))")
    assert isinstance(e, ExpInt1)
    assert e.arg == mul(-1, B, add(Y, Z))


def test_structural_equality_is_identity():
    assert P("x*y + 2") is P("2 + y*x")
    assert P("x - x") is Const(0)
    assert P("exp(x)*exp(-x)") is Const(1)


@pytest.mark.parametrize("text, offset", [
    ("x + * y", 4),
    ("(x + y", 6),
    ("x $ y", 2),
    ("\u00a0x + $", 6),  # offsets count UTF-8 bytes: the leading space is two
    ("x ^ y", 4),
])
def test_parse_errors_carry_byte_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        P(text)
    assert info.value.offset == offset


def test_unknown_identifier_lists_declared_names():
    with pytest.raises(UnknownIdentifierError) as info:
        P("x + w")
    assert info.value.name == "w"
    assert set(info.value.declared) == {"x", "y", "z", "b"}
    assert info.value.offset == 4


def test_division_by_literal_zero_rejected():
    with pytest.raises(ParseError):
        P("x/0")


# -- rendering round trip ---------------------------------------------------------------

leaves = st.sampled_from([X, Y, Z, B, Const(2), Const(Fraction(1, 3)), Const(-1)])


def _grow(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: add(*t)),
        st.tuples(children, children).map(lambda t: mul(*t)),
        children.map(exp),
        children.map(ei1),
        st.tuples(children, st.sampled_from([2, 3, -1, Fraction(1, 2)])).map(lambda t: t[0] ** t[1]),
    )


exprs = st.recursive(leaves, _grow, max_leaves=10)


@given(exprs)
def test_render_parse_round_trip(e):
    assert P(render(e)) is e
    assert P(render(e, full=False)) is e


# -- evaluation ------------------------------------------------------------------------------

def test_eval_vanishes_at_origin():
    assert evaluate(P("1 - exp(-(b+1)*y)"), {"y": 0, "b": 1}) == 0.0


def test_e1_at_one_against_quadrature():
    oracle, err = quad(lambda t: math.exp(-t) / t, 1, math.inf, epsabs=0, epsrel=1e-13)
    assert err < 1e-12
    got = evaluate(parse("Ei1(u)", ("u",)), {"u": 1})
    assert got == pytest.approx(oracle, rel=1e-13, abs=0)
    assert got == pytest.approx(0.21938393439552027, rel=1e-14)


@pytest.mark.parametrize("u", [1e-8, 0.01, 0.5, 3.9, 4.1, 10, 35, 700,
                               -1e-6, -0.3, -2, -4.5, -25, -39.9, -40.1, -80, -300])
def test_e1_against_mpmath(u):
    # negative arguments take the principal value -Ei(-u), which is real
    oracle = float(mpmath.e1(u)) if u > 0 else float(-mpmath.ei(-u))
    assert exp_int1(u) == pytest.approx(oracle, rel=2e-14)


def test_e1_pole_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse("Ei1(u)", ("u",)), {"u": 0})


def test_sinh_times_exp_at_zero():
    assert evaluate(P("sinh(z)*exp(-z)"), {"z": 0}) == 0.0


def test_ln_domain_error_reports_sample_index():
    with pytest.raises(DomainError) as info:
        evaluate_many([P("ln(x - 0.5)")], {"x": np.array([1.0, 0.9, 0.4, 0.2])})
    assert info.value.index == 2


def test_unbound_name():
    with pytest.raises(UnboundNameError):
        evaluate(P("x + y"), {"x": 1.0})


_SAFE = [X, Y, Const(Fraction(1, 2)), Const(3)]


def _safe_grow(children):
    # every node stays finite on [0.2, 1.2]^2
    return st.one_of(
        st.tuples(children, children).map(lambda t: add(*t)),
        st.tuples(children, children).map(lambda t: mul(*t)),
        children.map(lambda u: exp(mul(Fraction(1, 4), u))),
        children.map(sin),
        children.map(lambda u: ei1(add(1, mul(u, u)))),
        children.map(lambda u: ln(add(1, mul(u, u)))),
        children.map(lambda u: (add(2, mul(u, u))) ** Fraction(-1, 2)),
    )


safe_exprs = st.recursive(st.sampled_from(_SAFE), _safe_grow, max_leaves=6)


def _to_sympy(e):
    return sympy.sympify(render(e).replace("^", "**"),
                         locals={"Ei1": lambda u: sympy.expint(1, u), "ln": sympy.log})


@given(safe_exprs, st.floats(0.2, 1.2), st.floats(0.2, 1.2))
def test_evaluate_matches_sympy(e, x, y):
    oracle = float(_to_sympy(e).evalf(30, subs={sympy.Symbol("x"): x, sympy.Symbol("y"): y}))
    assert evaluate(e, {"x": x, "y": y}) == pytest.approx(oracle, rel=1e-10, abs=1e-12)


# -- differentiation -----------------------------------------------------------------------

def test_diff_exp_linear():
    assert diff(P("exp(2*x)"), "x") is P("2*exp(2*x)")


def test_diff_parameter_is_zero():
    assert diff(B, "x") is Const(0)
    assert diff(P("b*y"), "b") is Const(0)  # parameters are not differentiation variables


def test_diff_ei1_against_finite_differences():
    e = P("Ei1(-b*(y+z))")
    d = diff(e, "y")
    closed = P("-exp(b*(y+z))/(y+z)")
    rng = np.random.default_rng(7)
    for _ in range(20):
        pt = {"y": rng.uniform(0.2, 1.2), "z": rng.uniform(0.2, 1.2), "b": rng.uniform(0.5, 2)}
        h = 1e-5
        fd = (evaluate(e, {**pt, "y": pt["y"] + h}) - evaluate(e, {**pt, "y": pt["y"] - h})) / (2 * h)
        assert evaluate(d, pt) == pytest.approx(fd, rel=1e-6)
        assert evaluate(d, pt) == pytest.approx(evaluate(closed, pt), rel=1e-12)


def _five_point(e, pt, v, h=1e-3):
    def at(s):
        return evaluate(e, {**pt, v: pt[v] + s})
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)


@settings(max_examples=100, derandomize=True)
@given(safe_exprs, st.sampled_from(["x", "y"]), st.floats(0.3, 1.1), st.floats(0.3, 1.1))
def test_diff_against_finite_differences(e, v, x, y):
    pt = {"x": x, "y": y}
    d = evaluate(diff(e, v), pt)
    assert abs(d - _five_point(e, pt, v)) <= 1e-6 * max(1.0, abs(d))


@given(safe_exprs, safe_exprs, st.integers(-3, 3))
def test_diff_is_linear(f, g, c):
    lhs = diff(add(f, mul(c, g)), "x")
    rhs = add(diff(f, "x"), mul(c, diff(g, "x")))
    assert is_zero(add(lhs, mul(-1, rhs)), SamplingBox.uniform("xy"), samples=20)


def test_expand_exposes_cancellation():
    e = P("exp(y-z)*(1 - exp(z-y)) + 1 - exp(y-z)")
    assert e is not Const(0)
    assert expand(e) is Const(0)


def test_subs_binds_parameter():
    assert subs(P("b*x + b"), {"b": 2}) is P("2*x + 2")


# -- zero test ----------------------------------------------------------------------------------

def test_is_zero_algebraic_identity():
    e = add(P("(x+y)^2"), mul(-1, P("x^2 + 2*x*y + y^2")))
    assert is_zero(e, SamplingBox.uniform("xy", -3, 3), tol=1e-10)


def test_is_zero_rejects_with_witness():
    t = is_zero(P("x - y"), SamplingBox.uniform("xy"))
    assert not t and t.verdict == "nonzero"
    w = t.witness
    assert abs(w["x"] - w["y"]) == pytest.approx(t.witness_residual)


def test_is_zero_is_deterministic():
    box = SamplingBox.uniform("xyz")
    a = is_zero(P("x*y - z"), box, seed=5)
    b = is_zero(P("x*y - z"), box, seed=5)
    assert a == b


def test_is_zero_bad_box():
    t = is_zero(P("ln(x - 1)"), SamplingBox.uniform("x"))
    assert t.verdict == "bad_box" and not t


def test_exclusions_are_respected():
    box = SamplingBox.uniform("xy").with_exclusions([(P("x - y"), 0.3)])
    pts = box.sample(300, 1)
    assert np.all(np.abs(pts["x"] - pts["y"]) >= 0.3)
