"""
Expression substrate: parse, evaluate, differentiate and print formulas
"""
from app.expr.calculus import diff, fold, gradient
from app.expr.compiler import CompiledExprs, compile_exprs
from app.expr.evaluate import Bindings, evaluate, evaluate_constant
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
    is_coordinate,
    substitute,
)
from app.expr.parser import check_names, parse
from app.expr.printer import fmt

__all__ = [
    "Binary",
    "Bindings",
    "CompiledExprs",
    "Constant",
    "Expr",
    "ONE",
    "Unary",
    "Variable",
    "ZERO",
    "check_names",
    "compile_exprs",
    "diff",
    "evaluate",
    "evaluate_constant",
    "fmt",
    "fold",
    "free_variables",
    "gradient",
    "is_constant",
    "is_coordinate",
    "parse",
    "substitute",
]
