"""
Recursive-descent parser for the expression grammar (see docs/EXPRESSION_GRAMMAR.md)

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := number | name | name "(" expr ")" | "(" expr ")"
"""
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional

from app.core.exceptions import (
    ExpressionSyntaxError,
    NonConstantExponentError,
    UndeclaredNameError,
    UnknownFunctionError,
)
from app.expr.nodes import (
    UNARY_FUNCTIONS,
    Binary,
    Constant,
    Expr,
    Unary,
    Variable,
    free_variables,
    is_constant,
    is_coordinate,
)

_NUMBER = "number"
_NAME = "name"
_OP = "operator"
_END = "end of input"

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<operator>[-+*/^()])"
    r")"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def tokenize(source: str) -> List[Token]:
    tokens = []
    index = 0
    while index < len(source):
        if source[index:].strip() == "":
            break
        match = _TOKEN_RE.match(source, index)
        if match is None or match.lastgroup is None:
            stripped = len(source[index:]) - len(source[index:].lstrip())
            position = index + stripped
            raise ExpressionSyntaxError(
                f"unexpected character {source[position]!r}",
                _byte_offset(source, position),
                (_NUMBER, _NAME, "operator"),
                source,
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), _byte_offset(source, start)))
        index = match.end()
    tokens.append(Token(_END, "", _byte_offset(source, len(source))))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.position = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def peek(self, ahead: int = 1) -> Token:
        index = min(self.position + ahead, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.current
        if token.kind != _END:
            self.position += 1
        return token

    def is_op(self, text: str, token: Optional[Token] = None) -> bool:
        token = token or self.current
        return token.kind == _OP and token.text == text

    def fail(self, message: str, expected: Iterable[str]):
        token = self.current
        found = token.text if token.kind != _END else _END
        raise ExpressionSyntaxError(f"{message}, found {found!r}", token.offset, expected, self.source)

    def expect_op(self, text: str):
        if not self.is_op(text):
            self.fail("syntax error", (text,))
        self.advance()

    def parse(self) -> Expr:
        result = self.expression()
        if self.current.kind != _END:
            self.fail("unexpected trailing input", ("+", "-", "*", "/", "^", _END))
        return result

    def expression(self) -> Expr:
        left = self.term()
        while self.is_op("+") or self.is_op("-"):
            op = self.advance().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.is_op("*") or self.is_op("/"):
            op = self.advance().text
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.is_op("-"):
            # "-2" is a literal unless it is the base of "^": -2^2 means -(2^2)
            if self.peek().kind == _NUMBER and not self.is_op("^", self.peek(2)):
                self.advance()
                return Constant(-float(self.advance().text))
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.is_op("^"):
            self.advance()
            start = self.current.offset
            exponent = self.unary()
            if not is_constant(exponent):
                raise NonConstantExponentError(
                    "exponent must be a constant", start, (_NUMBER,), self.source
                )
            return Binary("^", base, exponent)
        return base

    def atom(self) -> Expr:
        token = self.current
        if token.kind == _NUMBER:
            self.advance()
            return Constant(float(token.text))
        if token.kind == _NAME:
            self.advance()
            if self.is_op("("):
                if token.text not in UNARY_FUNCTIONS:
                    raise UnknownFunctionError(
                        f"unknown function {token.text!r}", token.offset, UNARY_FUNCTIONS, self.source
                    )
                self.advance()
                argument = self.expression()
                self.expect_op(")")
                return Unary(token.text, argument)
            if token.text in UNARY_FUNCTIONS:
                self.fail(f"function {token.text!r} needs an argument", ("(",))
            return Variable(token.text)
        if self.is_op("("):
            self.advance()
            inner = self.expression()
            self.expect_op(")")
            return inner
        self.fail("syntax error", (_NUMBER, _NAME, "(", "-"))


def parse(source: str, parameters: Optional[Iterable[str]] = None, dimension: Optional[int] = None) -> Expr:
    """Parse source into an expression tree

    When parameters is given every non-coordinate name must be declared in it;
    when dimension is given q<i>/p<i> indices must not exceed it.
    """
    expression = _Parser(source).parse()
    if parameters is not None or dimension is not None:
        check_names(expression, parameters, dimension)
    return expression


def check_names(e: Expr, parameters: Optional[Iterable[str]] = None, dimension: Optional[int] = None):
    declared = set(parameters) if parameters is not None else None
    for name in sorted(free_variables(e)):
        if is_coordinate(name):
            if dimension is not None and name != "t" and int(name[1:]) > dimension:
                raise UndeclaredNameError(name, f"coordinate exceeds dimension {dimension}")
        elif declared is not None and name not in declared:
            raise UndeclaredNameError(name)
