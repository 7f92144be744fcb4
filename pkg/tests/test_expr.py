import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hbnfactor import expr as ex
from hbnfactor.expr import Arithmetic, BinOp, Const, Normal, ParseError, Var


# ---------------------------------------------------------------- parsing

def test_normal_with_implicit_coefficients():
    p = ex.parse("Normal(0.3X + 0.1Y + Z, 1000)")
    assert isinstance(p.head, Normal)
    expected = BinOp("+", BinOp("+", BinOp("*", Const(0.3), Var("X")),
                                BinOp("*", Const(0.1), Var("Y"))), Var("Z"))
    assert p.head.mean == expected
    assert p.head.variance == Const(1000.0)
    assert p.free_vars == ("X", "Y", "Z")


def test_bare_expression_is_arithmetic_and_left_associative():
    p = ex.parse("X1 + X2 + X3")
    assert p.head == Arithmetic(BinOp("+", BinOp("+", Var("X1"), Var("X2")), Var("X3")))
    assert p.free_vars == ("X1", "X2", "X3")


def test_truncated_call_reports_offset_of_comma():
    with pytest.raises(ParseError) as err:
        ex.parse("Normal(X,")
    assert err.value.offset == "Normal(X,".index(",")


@pytest.mark.parametrize("text, offset", [
    ("Foo(X)", 0),
    ("Arithmetic((X)", 10),
    ("Normal(X, Y)", 10),
])
def test_errors_carry_offsets(text, offset):
    with pytest.raises(ParseError) as err:
        ex.parse(text)
    assert err.value.offset == offset


def test_student_arity_is_checked():
    with pytest.raises(ParseError, match="argument"):
        ex.parse("Student(1, 2, 3)")


@pytest.mark.parametrize("text", ["Normal(X, 0)", "Normal(X, -1)"])
def test_normal_variance_must_be_positive(text):
    with pytest.raises(ParseError):
        ex.parse(text)


def test_subtraction_is_left_associative_and_power_right():
    assert ex.parse_expr("a - b - c") == BinOp("-", BinOp("-", Var("a"), Var("b")), Var("c"))
    assert ex.parse_expr("2^3^2") == BinOp("^", Const(2.0), BinOp("^", Const(3.0), Const(2.0)))
    assert ex.evaluate(ex.parse_expr("2^3^2"), {}) == 512.0


def test_precedence_of_products_over_sums():
    assert ex.evaluate(ex.parse_expr("1 + 2*3 - 4/2"), {}) == 5.0
    assert ex.evaluate(ex.parse_expr("(1 + 2)*3"), {}) == 9.0


def test_unicode_operators():
    assert ex.parse_expr("X × 2 ÷ Y") == ex.parse_expr("X * 2 / Y")


def test_unary_minus():
    assert ex.parse_expr("-3") == Const(-3.0)
    assert ex.evaluate(ex.parse_expr("-(X + 1)"), {"X": 2.0}) == -3.0
    assert ex.evaluate(ex.parse_expr("2^-1"), {}) == 0.5


# ---------------------------------------------------------------- printing

def test_unparse_examples():
    mean = ex.parse("Normal(0.3X + 0.1Y + Z, 1000)").head.mean
    assert ex.unparse(mean) == "0.3*X + 0.1*Y + Z"
    assert ex.unparse(Const(1000.0)) == "1000"
    assert ex.unparse(BinOp("/", Var("X"), BinOp("+", Var("Y"), Var("Z")))) == "X / (Y + Z)"
    assert ex.unparse(ex.parse("Normal(X1 + X2 + X3, 1000)")) == "Normal(X1 + X2 + X3, 1000)"


_names = st.sampled_from(["X", "Y", "Z", "X1", "X2", "C_E0", "d", "w3"])
_consts = st.one_of(st.integers(-50, 50).map(float),
                    st.integers(-5000, 5000).map(lambda k: k / 100))
_leaves = st.one_of(_names.map(Var), _consts.map(Const))
_asts = st.recursive(
    _leaves,
    lambda kids: st.builds(BinOp, st.sampled_from(ex.OPS), kids, kids),
    max_leaves=12,
)


@settings(max_examples=1000)
@given(_asts)
def test_unparse_parse_round_trip(ast):
    assert ex.parse_expr(ex.unparse(ast)) == ast


@settings(max_examples=200)
@given(_asts, st.sampled_from(["Normal", "Arithmetic"]))
def test_head_round_trip(ast, head):
    text = f"Normal({ex.unparse(ast)}, 4)" if head == "Normal" else f"Arithmetic({ex.unparse(ast)})"
    p = ex.parse(text)
    assert ex.parse(ex.unparse(p)) == p


# ---------------------------------------------------------------- substitution

def test_substitute_subtree():
    ast = ex.parse_expr("X1 + X2 + X3")
    new, found = ex.substitute(ast, ex.parse_expr("X1 + X2"), Var("E0"))
    assert found and new == BinOp("+", Var("E0"), Var("X3"))


def test_substitute_variable_and_missing():
    assert ex.substitute(Var("X"), "X", "Y") == (Var("Y"), True)
    assert ex.substitute(Var("X"), "Q", "Y") == (Var("X"), False)


@given(_asts, _names, _names)
def test_substitute_removes_target(ast, target, other):
    new, found = ex.substitute(ast, target, Var(other))
    assert found == (target in ex.free_vars(ast))
    if target != other:
        assert target not in ex.free_vars(new)


def test_substitute_inside_head():
    head = ex.parse("Normal(X1 + X2 + X3, 1000)").head
    new, found = ex.substitute(head, ex.parse_expr("X1 + X2"), Var("E0"))
    assert found and ex.unparse(new) == "Normal(E0 + X3, 1000)"


# ---------------------------------------------------------------- evaluation

def test_evaluate_broadcasts():
    vals = ex.evaluate(ex.parse_expr("X*2 + Y"), {"X": np.arange(3.0)[:, None], "Y": np.ones(2)})
    assert vals.shape == (3, 2)
    np.testing.assert_array_equal(vals[:, 0], [1.0, 3.0, 5.0])


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_evaluate_matches_python(x, y):
    got = ex.evaluate(ex.parse_expr("0.5X - 3*Y + X*Y"), {"X": x, "Y": y})
    assert math.isclose(got, 0.5 * x - 3 * y + x * y, rel_tol=1e-12, abs_tol=1e-9)


def test_lint_flags_literal_zero_divisor():
    assert ex.lint(ex.parse("Arithmetic(X / 0)"))
    assert not ex.lint(ex.parse("Arithmetic(X / 2)"))


def test_free_vars_first_occurrence_order():
    assert ex.free_vars(ex.parse_expr("B*A + B + C")) == ("B", "A", "C")
