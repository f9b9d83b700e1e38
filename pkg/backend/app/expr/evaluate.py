"""
Tree-walking evaluator
"""
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from app.core.exceptions import EvaluationDomainError, UndeclaredNameError
from app.expr.nodes import Binary, Constant, Expr, Unary, Variable, coordinate_index
from app.expr.printer import fmt


@dataclass(frozen=True)
class Bindings:
    t: float = 0.0
    q: Sequence[float] = ()
    p: Sequence[float] = ()
    params: Mapping[str, float] = field(default_factory=dict)


def _domain(message: str, e: Expr):
    raise EvaluationDomainError(message, fmt(e))


def pow_(x: float, y: float) -> float:
    return math.pow(x, y)


FUNCTIONS = {
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
}


def _lookup(name: str, b: Bindings) -> float:
    if name == "t":
        return float(b.t)
    head = name[0]
    if head in "qp" and name[1:].isdigit():
        values = b.q if head == "q" else b.p
        index = coordinate_index(name)
        if index < len(values):
            return float(values[index])
        raise UndeclaredNameError(name, "unbound coordinate")
    if name in b.params:
        return float(b.params[name])
    raise UndeclaredNameError(name, "unbound parameter")


def evaluate(e: Expr, b: Bindings) -> float:
    """Evaluate e; domain failures name the offending subexpression"""
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        return _lookup(e.name, b)
    if isinstance(e, Unary):
        x = evaluate(e.child, b)
        if e.op == "neg":
            return -x
        if e.op == "sqrt" and x < 0.0:
            _domain("square root of a negative number", e)
        if e.op == "ln" and x <= 0.0:
            _domain("logarithm of a non-positive number", e)
        try:
            return FUNCTIONS[e.op](x)
        except (ValueError, OverflowError):
            _domain(f"{e.op} outside its domain", e)
    x = evaluate(e.left, b)
    y = evaluate(e.right, b)
    if e.op == "+":
        return x + y
    if e.op == "-":
        return x - y
    if e.op == "*":
        return x * y
    if e.op == "/":
        if y == 0.0:
            _domain("division by zero", e)
        return x / y
    try:
        return pow_(x, y)
    except (ValueError, ZeroDivisionError, OverflowError):
        _domain("power outside its domain", e)


def evaluate_constant(e: Expr) -> float:
    return evaluate(e, Bindings())
