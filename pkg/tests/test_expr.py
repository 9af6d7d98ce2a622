import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from warpiso import expr as E


def trees(max_depth=8):
    leaves = st.one_of(
        st.just(E.R),
        st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(E.Num),
    )

    def extend(children):
        return st.one_of(
            children.map(E.Neg),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: E.BinOp(*t)),
            st.tuples(st.sampled_from(E.FUNCTIONS), children).map(lambda t: E.Call(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=2 ** max_depth)


def depth(e):
    if isinstance(e, (E.Num, E.Var)):
        return 1
    if isinstance(e, (E.Neg, E.Call)):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


@given(trees())
def test_print_then_parse_is_identity(tree):
    assume(depth(tree) <= 8)
    assert E.parse(E.to_text(tree)) == tree


def test_parse_shapes():
    t = E.parse("exp(r^2 - 2*r + 2)")
    two = E.Num(2.0)
    expected = E.Call("exp", E.BinOp("+", E.BinOp("-", E.BinOp("^", E.R, two),
                                                       E.BinOp("*", two, E.R)), two))
    assert t == expected
    assert E.parse("r") == E.R
    assert E.evaluate(E.parse("r^-4"), 2.0) == 0.0625


@pytest.mark.parametrize("text, r, value", [
    ("2*r^2", 3.0, 18.0),
    ("-r^2", 3.0, -9.0),
    ("2^3^2", 1.0, 512.0),
    ("exp(r^(-1))", 1.0, math.e),
    ("r^(-4)", 10.0, 1e-4),
    ("exp(r^2-2*r+2)", 1.0, math.e),
    ("log(exp(r))", 0.7, 0.7),
    ("(r+1)/(r-1)", 3.0, 2.0),
])
def test_evaluation_examples(text, r, value):
    assert E.evaluate(E.parse(text), r) == pytest.approx(value, rel=1e-14)


@given(st.floats(min_value=0.01, max_value=100))
def test_precedence_power_before_product(r):
    assert E.evaluate(E.parse("2*r^2"), r) == 2 * r ** 2


@pytest.mark.parametrize("text, exc, pos", [
    ("", E.ExprSyntaxError, 0),
    ("   ", E.ExprSyntaxError, 0),
    ("r +", E.ExprSyntaxError, 3),
    ("2 * x", E.UnknownIdentifierError, 4),
    ("sin(r)", E.UnknownIdentifierError, 0),
    ("(r", E.ExprSyntaxError, 2),
    ("r $ 2", E.ExprSyntaxError, 2),
])
def test_syntax_errors_carry_position(text, exc, pos):
    with pytest.raises(exc) as info:
        E.parse(text)
    assert info.value.position == pos


@pytest.mark.parametrize("text, r, exc", [
    ("log(r)", -1.0, E.DomainError),
    ("log(r - 1)", 1.0, E.DomainError),
    ("r^0.5", -4.0, E.DomainError),
    ("1/(r-2)", 2.0, E.SingularityError),
    ("r^-1", 0.0, E.SingularityError),
    ("exp(r)", 1000.0, E.DensityOverflowError),
    ("r^300", 1e10, E.DensityOverflowError),
])
def test_evaluation_errors(text, r, exc):
    with pytest.raises(exc):
        E.evaluate(E.parse(text), r)


def test_evaluate_is_vectorized():
    r = np.linspace(0.5, 2, 7)
    np.testing.assert_allclose(E.evaluate(E.parse("r^2*exp(-r)"), r), r ** 2 * np.exp(-r))


def test_derivative_examples():
    d = E.differentiate(E.parse("r^2.5"))
    r = np.linspace(0.3, 4, 9)
    np.testing.assert_allclose(E.evaluate(d, r), 2.5 * r ** 1.5, rtol=1e-14)
    assert E.evaluate(E.differentiate(E.parse("exp(r^2)")), 1.0) == pytest.approx(2 * math.e, rel=1e-14)
    assert E.differentiate(E.parse("7")) == E.Num(0.0)
    assert E.is_constant(E.differentiate(E.parse("3*r")))


def _central(e, r, h):
    return (E.evaluate(e, r + h) - E.evaluate(e, r - h)) / (2 * h)


SMOOTH = ["r^2", "r^-4", "exp(r^2-2*r+2)", "exp(1/r)", "exp(r^1.5)", "log(r)*r^3",
          "r^-2.5*exp(-r)", "(r+1)/(r^2+1)", "exp(-r)*log(1+r)", "2^r"]


@pytest.mark.parametrize("text", SMOOTH)
def test_symbolic_matches_finite_differences(text):
    rng = np.random.default_rng(11)
    d = E.DerivedExpr.of(E.parse(text))
    for r in rng.uniform(0.2, 3.0, 100):
        h = 1e-5 * r
        for f, df in ((d.value, d.first), (d.first, d.second)):
            exact = E.evaluate(df, r)
            approx = _central(f, r, h)
            assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact)), (text, r)


@given(trees(4), st.floats(min_value=0.2, max_value=3.0))
def test_random_tree_derivatives(tree, r):
    h = 1e-5 * r
    try:
        vals = [E.evaluate(tree, x) for x in (r - 2 * h, r - h, r, r + h, r + 2 * h)]
        exact = E.evaluate(E.differentiate(tree), r)
    except (E.EvaluationError, OverflowError):
        assume(False)
        return
    assume(all(math.isfinite(v) and abs(v) < 1e6 for v in vals) and math.isfinite(exact))
    # five-point stencil, and only where the function is locally tame
    approx = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * h)
    second = (vals[3] - 2 * vals[2] + vals[1]) / h ** 2
    assume(abs(second) < 1e4 and abs(exact) < 1e4)
    # truncation plus the stencil's cancellation error, which scales like eps*|f|/h
    roundoff = 16 * np.finfo(float).eps * max(abs(v) for v in vals) / h
    assert abs(exact - approx) <= 1e-5 * max(1.0, abs(exact)) + roundoff


def test_substitute_and_simplify():
    e = E.parse("r^2 + 3*r")
    minus = E.substitute(e, E.Neg(E.R))
    assert E.evaluate(minus, -2.0) == E.evaluate(e, 2.0)
    assert E.simplify(E.parse("0 + r*1")) == E.R
    assert E.simplify(E.parse("2*3")) == E.Num(6.0)
    assert E.mul(E.parse("r^-2"), E.parse("r^2")) == E.Num(1.0)
