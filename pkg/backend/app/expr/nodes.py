"""
Expression tree nodes

Nodes are frozen dataclasses, so structural equality and hashing come for free
and trees can be shared between threads and processes.
"""
import re
from dataclasses import dataclass
from typing import FrozenSet, Union

UNARY_FUNCTIONS = ("sqrt", "sin", "cos", "exp", "ln")
UNARY_OPS = ("neg",) + UNARY_FUNCTIONS
BINARY_OPS = ("+", "-", "*", "/", "^")

COORDINATE_PATTERN = re.compile(r"^(t|q[1-9][0-9]*|p[1-9][0-9]*)$")


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


Expr = Union[Constant, Variable, Unary, Binary]

ZERO = Constant(0.0)
ONE = Constant(1.0)


def is_coordinate(name: str) -> bool:
    """True for the reserved names t, q<i>, p<i>"""
    return COORDINATE_PATTERN.match(name) is not None


def coordinate_index(name: str) -> int:
    """Zero-based index of q<i>/p<i>"""
    return int(name[1:]) - 1


def free_variables(e: Expr) -> FrozenSet[str]:
    if isinstance(e, Variable):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_variables(e.child)
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    return frozenset()


def is_constant(e: Expr) -> bool:
    return not free_variables(e)


def substitute(e: Expr, replacements: dict) -> Expr:
    """Replace variables by expressions (used for scenario definitions)"""
    if isinstance(e, Variable):
        return replacements.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.child, replacements))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, replacements), substitute(e.right, replacements))
    return e


def node_count(e: Expr) -> int:
    if isinstance(e, Unary):
        return 1 + node_count(e.child)
    if isinstance(e, Binary):
        return 1 + node_count(e.left) + node_count(e.right)
    return 1
