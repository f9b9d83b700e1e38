import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import expressions, small_values, smooth_points

from app.core.exceptions import (
    EvaluationDomainError,
    ExpressionSyntaxError,
    NonConstantExponentError,
    UndeclaredNameError,
    UnknownFunctionError,
)
from app.expr import (
    ZERO,
    Binary,
    Bindings,
    Constant,
    Unary,
    Variable,
    compile_exprs,
    diff,
    evaluate,
    fmt,
    fold,
    free_variables,
    parse,
    substitute,
)

SMOOTH = [
    "q1^2 + sin(t)*p1",
    "1/sqrt(1 + a^2*q2^2)",
    "exp(-t)*cos(q1*q2) - ln(2 + q2^2)",
    "(q1 - p2)^3/(1 + q1^2)",
    "a*q2*p1 + 0.1*cos(t)",
    "-q1^2 + 3*t*p2^0.5",
]
POINT = Bindings(t=0.3, q=[0.7, -0.4], p=[1.1, 0.9], params={"a": 1.5})
VARS = ["t", "q1", "q2", "p1", "p2"]


def test_parse_builds_precedence_tree():
    assert parse("q1^2 + sin(t)*p1") == Binary(
        "+",
        Binary("^", Variable("q1"), Constant(2)),
        Binary("*", Unary("sin", Variable("t")), Variable("p1")),
    )


def test_parse_gauge_function():
    expected = Binary(
        "/",
        Constant(1),
        Unary("sqrt", Binary(
            "+",
            Constant(1),
            Binary("*", Binary("^", Variable("a"), Constant(2)), Binary("^", Variable("q2"), Constant(2))),
        )),
    )
    assert parse("1/sqrt(1+a^2*q2^2)") == expected


def test_parse_zero_literal():
    assert parse("0") == ZERO


def test_binary_operators_are_left_associative():
    assert parse("q1 - q2 - q3") == Binary("-", Binary("-", Variable("q1"), Variable("q2")), Variable("q3"))
    assert parse("q1 / q2 * q3") == Binary("*", Binary("/", Variable("q1"), Variable("q2")), Variable("q3"))


def test_negative_literal_binds_looser_than_power():
    assert parse("-2^2") == Unary("neg", Binary("^", Constant(2), Constant(2)))
    assert evaluate(parse("-2^2"), Bindings()) == -4.0
    assert parse("-2") == Constant(-2)


@pytest.mark.parametrize("source, a, q2, expected", [
    ("1/sqrt(1+a^2*q2^2)", 0.0, 5.0, 1.0),
    ("1/sqrt(1+a^2*q2^2)", 1.0, 1.0, 1.0 / math.sqrt(2.0)),
])
def test_evaluate_gauge_function(source, a, q2, expected):
    value = evaluate(parse(source), Bindings(q=[0.0, q2], params={"a": a}))
    assert value == pytest.approx(expected, rel=1e-15)


def test_evaluate_polynomial_and_trig():
    value = evaluate(parse("q1^2 + sin(t)*p1"), Bindings(t=0.0, q=[3.0], p=[7.0]))
    assert value == 9.0


def test_syntax_error_reports_offset_and_expected_tokens():
    with pytest.raises(ExpressionSyntaxError) as error:
        parse("1 + * 2")
    assert error.value.offset == 4
    assert "(" in error.value.expected


def test_unexpected_character_offset_is_in_bytes():
    with pytest.raises(ExpressionSyntaxError) as error:
        parse("q1 + é")
    assert error.value.offset == 5


def test_unclosed_parenthesis():
    with pytest.raises(ExpressionSyntaxError) as error:
        parse("sin(q1")
    assert error.value.offset == 6
    assert ")" in error.value.expected


def test_unknown_function():
    with pytest.raises(UnknownFunctionError) as error:
        parse("tanh(q1)")
    assert error.value.offset == 0


def test_non_constant_exponent():
    with pytest.raises(NonConstantExponentError):
        parse("q1^q2")
    assert parse("q1^(2*3)") == Binary("^", Variable("q1"), Binary("*", Constant(2), Constant(3)))


def test_undeclared_parameter():
    with pytest.raises(UndeclaredNameError) as error:
        parse("k*q1", parameters=["m"])
    assert error.value.name == "k"


def test_coordinate_beyond_dimension():
    with pytest.raises(UndeclaredNameError):
        parse("q5 + p1", parameters=[], dimension=3)
    parse("q3 + p3 + t", parameters=[], dimension=3)


@pytest.mark.parametrize("source, subexpression", [
    ("sqrt(q1 - 2)", "sqrt(q1 - 2)"),
    ("ln(q1 - q1)", "ln(q1 - q1)"),
    ("p1/(q1 - 1)", "p1 / (q1 - 1)"),
])
def test_domain_errors_name_the_subexpression(source, subexpression):
    with pytest.raises(EvaluationDomainError) as error:
        evaluate(parse(source), Bindings(q=[1.0], p=[1.0]))
    assert error.value.subexpression == subexpression


def test_compiled_kernel_names_failing_subexpression():
    kernel = compile_exprs([parse("q1 + 1"), parse("sqrt(q1)")])
    with pytest.raises(EvaluationDomainError) as error:
        kernel(0.0, [-1.0], [], {})
    assert error.value.subexpression == "sqrt(q1)"


def test_compiled_kernel_matches_tree_evaluation_exactly():
    exprs = [parse(source) for source in SMOOTH]
    values = compile_exprs(exprs)(POINT.t, POINT.q, POINT.p, POINT.params)
    assert list(values) == [evaluate(e, POINT) for e in exprs]


def shifted_value(e, point, var, delta):
    t, q, p = point.t, list(point.q), list(point.p)
    if var == "t":
        t += delta
    else:
        target = q if var[0] == "q" else p
        target[int(var[1:]) - 1] += delta
    return evaluate(e, Bindings(t=t, q=q, p=p, params=point.params))


@pytest.mark.parametrize("source", SMOOTH)
@pytest.mark.parametrize("var", VARS)
@settings(max_examples=100, deadline=None)
@given(point=smooth_points)
def test_derivative_matches_central_difference(source, var, point):
    e = parse(source)
    derivative = evaluate(diff(e, var), point)
    step = 1e-6
    estimate = (shifted_value(e, point, var, step) - shifted_value(e, point, var, -step)) / (2 * step)
    assert abs(derivative - estimate) <= 1e-6 * (1 + abs(derivative))


@settings(max_examples=200, deadline=None)
@given(
    first=st.sampled_from(SMOOTH),
    second=st.sampled_from(SMOOTH),
    alpha=small_values,
    var=st.sampled_from(VARS),
    point=smooth_points,
)
def test_derivative_is_linear(first, second, alpha, var, point):
    e1, e2 = parse(first), parse(second)
    combined = Binary("+", Binary("*", Constant(alpha), e1), e2)
    expected = alpha * evaluate(diff(e1, var), point) + evaluate(diff(e2, var), point)
    assert evaluate(diff(combined, var), point) == pytest.approx(expected, rel=1e-12, abs=1e-10)


def test_derivative_of_absent_variable_is_zero():
    assert diff(parse("sin(q1)*exp(t)"), "p3") == ZERO


def test_derivative_folds_constants():
    assert diff(parse("3*q1"), "q1") == Constant(3)
    assert diff(parse("q1^2"), "q1") == Binary("*", Constant(2), Variable("q1"))


def test_fold_collapses_constant_subtrees():
    assert fold(parse("2*3 + q1*1 - 0")) == Binary("+", Constant(6), Variable("q1"))


def test_free_variables_and_substitute():
    e = parse("a*q2 + b")
    assert free_variables(e) == {"a", "q2", "b"}
    expanded = substitute(e, {"a": parse("1 + 0.5*sin(t)")})
    assert free_variables(expanded) == {"t", "q2", "b"}


@pytest.mark.parametrize("tree, text", [
    (Constant(-2), "-2"),
    (Unary("neg", Constant(2)), "-(2)"),
    (Binary("-", Variable("x"), Binary("-", Variable("y"), Variable("z"))), "x - (y - z)"),
    (Binary("^", Constant(-2), Constant(2)), "(-2)^2"),
    (Binary("^", Variable("q1"), Constant(-1)), "q1^(-1)"),
    (Binary("*", Unary("neg", Variable("q1")), Variable("p1")), "(-q1) * p1"),
])
def test_printer_parenthesizes(tree, text):
    assert fmt(tree) == text
    assert parse(text) == tree


@settings(max_examples=1000, deadline=None)
@given(expressions)
def test_print_then_parse_is_identity(e):
    assert parse(fmt(e)) == e
