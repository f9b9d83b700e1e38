"""
Infix printer; parse(fmt(e)) == e for every tree
"""
from app.expr.nodes import Binary, Constant, Expr, Unary, Variable

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _precedence(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PRECEDENCE[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PRECEDENCE["neg"]
    if isinstance(e, Constant) and e.value < 0:
        return _PRECEDENCE["neg"]
    return _ATOM


def _wrap(e: Expr, parenthesize: bool) -> str:
    text = fmt(e)
    return f"({text})" if parenthesize else text


def fmt(e: Expr) -> str:
    if isinstance(e, Constant):
        return _format_number(e.value)
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            # a bare constant after "-" would re-parse as a negative literal
            child = e.child
            plain = isinstance(child, (Variable, Unary)) and not (
                isinstance(child, Unary) and child.op == "neg"
            )
            plain = plain or (isinstance(child, Binary) and child.op == "^")
            return "-" + _wrap(child, not plain)
        return f"{e.op}({fmt(e.child)})"
    op = e.op
    own = _PRECEDENCE[op]
    if op == "^":
        base = _wrap(e.left, _precedence(e.left) <= own)
        exponent = e.right
        simple = isinstance(exponent, Constant) and exponent.value >= 0
        return f"{base}^{_wrap(exponent, not simple)}"
    left = _wrap(e.left, _precedence(e.left) < own or _precedence(e.left) == _PRECEDENCE["neg"])
    right = _wrap(e.right, _precedence(e.right) <= own or _precedence(e.right) == _PRECEDENCE["neg"])
    return f"{left} {op} {right}"
