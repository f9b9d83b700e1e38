"""
Symbolic differentiation with constant folding

The smart constructors below only fold; they never reorder or expand. A node
whose operands are all variable-free is replaced by its value.
"""
import math
from functools import singledispatch

from app.core.exceptions import EvaluationDomainError
from app.expr.evaluate import evaluate_constant
from app.expr.nodes import (
    ONE,
    ZERO,
    Binary,
    Constant,
    Expr,
    Unary,
    Variable,
    free_variables,
    is_constant,
)


def _is_value(e: Expr, value: float) -> bool:
    return isinstance(e, Constant) and e.value == value


def _folded(e: Expr) -> Expr:
    if isinstance(e, Constant) or not is_constant(e):
        return e
    try:
        value = evaluate_constant(e)
    except (ArithmeticError, EvaluationDomainError):
        return e
    if math.isfinite(value):
        return Constant(value)
    return e


def const(value: float) -> Constant:
    return Constant(value)


def neg(a: Expr) -> Expr:
    if isinstance(a, Constant):
        return Constant(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_value(a, 0.0):
        return b
    if _is_value(b, 0.0):
        return a
    return _folded(Binary("+", a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_value(b, 0.0):
        return a
    if _is_value(a, 0.0):
        return neg(b)
    if a == b:
        return ZERO
    return _folded(Binary("-", a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_value(a, 0.0) or _is_value(b, 0.0):
        return ZERO
    if _is_value(a, 1.0):
        return b
    if _is_value(b, 1.0):
        return a
    if _is_value(a, -1.0):
        return neg(b)
    if _is_value(b, -1.0):
        return neg(a)
    return _folded(Binary("*", a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_value(a, 0.0) and not _is_value(b, 0.0):
        return ZERO
    if _is_value(b, 1.0):
        return a
    return _folded(Binary("/", a, b))


def power(a: Expr, exponent: Expr) -> Expr:
    exponent = _folded(exponent)
    if _is_value(exponent, 0.0):
        return ONE
    if _is_value(exponent, 1.0):
        return a
    return _folded(Binary("^", a, exponent))


def call(name: str, a: Expr) -> Expr:
    return _folded(Unary(name, a))


def fold(e: Expr) -> Expr:
    """Rebuild a tree bottom-up through the folding constructors"""
    if isinstance(e, Unary):
        child = fold(e.child)
        return neg(child) if e.op == "neg" else call(e.op, child)
    if isinstance(e, Binary):
        left, right = fold(e.left), fold(e.right)
        return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op](left, right)
    return e


@singledispatch
def _derivative(e, var: str) -> Expr:
    raise TypeError(f"cannot differentiate {type(e).__name__}")


@_derivative.register(Constant)
def _(e: Constant, var: str) -> Expr:
    return ZERO


@_derivative.register(Variable)
def _(e: Variable, var: str) -> Expr:
    return ONE if e.name == var else ZERO


@_derivative.register(Unary)
def _(e: Unary, var: str) -> Expr:
    u = e.child
    du = diff(u, var)
    if _is_value(du, 0.0):
        return ZERO
    if e.op == "neg":
        return neg(du)
    if e.op == "sqrt":
        return div(du, mul(const(2.0), call("sqrt", u)))
    if e.op == "sin":
        return mul(call("cos", u), du)
    if e.op == "cos":
        return mul(neg(call("sin", u)), du)
    if e.op == "exp":
        return mul(call("exp", u), du)
    if e.op == "ln":
        return div(du, u)
    raise TypeError(f"unknown unary operator {e.op!r}")


@_derivative.register(Binary)
def _(e: Binary, var: str) -> Expr:
    u, v = e.left, e.right
    if e.op == "^":
        # exponent is constant: d(u^c) = c * u^(c - 1) * du
        du = diff(u, var)
        return mul(mul(e.right, power(u, sub(e.right, ONE))), du)
    du, dv = diff(u, var), diff(v, var)
    if e.op == "+":
        return add(du, dv)
    if e.op == "-":
        return sub(du, dv)
    if e.op == "*":
        return add(mul(du, v), mul(u, dv))
    # quotient rule
    if _is_value(dv, 0.0):
        return div(du, v)
    return div(sub(mul(du, v), mul(u, dv)), power(v, const(2.0)))


def diff(e: Expr, var: str) -> Expr:
    """Exact partial derivative of e with respect to var, constant-folded"""
    if var not in free_variables(e):
        return ZERO
    return _derivative(e, var)


def gradient(e: Expr, variables) -> list:
    return [diff(e, var) for var in variables]
