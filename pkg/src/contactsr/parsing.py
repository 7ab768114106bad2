"""Infix expression parser.

Grammar (highest precedence first):

    ^                integer power, right associative
    unary -          negation
    * /              product and division
    + -              sum and difference

plus parentheses, function application ``f(x)`` for f in
{sin, cos, sqrt, exp, ln}, identifiers ``[a-zA-Z][a-zA-Z0-9_]*`` and decimal
or rational literals (``7``, ``0.5``, ``1e-3``, and ``7/3`` via division).
Exponents must reduce to integer constants.

The parser is a standard Pratt (precedence climbing) loop producing
:mod:`contactsr.expressions` trees; because the constructors normalise,
``parse_expr(serialize(e)) == e`` for every constructor-built tree.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import ExprSyntaxError, UnknownFunction
from .expressions import FUNCTIONS, Expr, Num, add, fun, mul, num, pow_, sym

_TOKEN_RE = re.compile(
    r"""
    (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?
       |\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>\^|\*|/|\+|-|\(|\))
  | (?P<ws>[ \t\r\n]+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column


def _tokenize(source: str):
    tokens = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        text = m.group()
        if kind == "bad":
            raise ExprSyntaxError(f"unexpected character {text!r}", line, col)
        if kind != "ws":
            tokens.append(_Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
    tokens.append(_Token("end", "", line, col))
    return tokens


def _number(text: str):
    if re.fullmatch(r"\d+", text):
        return Fraction(int(text))
    return float(text)


# binding powers: higher binds tighter
_BP_ADD = 10
_BP_MUL = 20
_BP_NEG = 25
_BP_POW = 30


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok.line, tok.column)

    def expect(self, text):
        tok = self.advance()
        if tok.text != text:
            shown = tok.text if tok.text else "end of input"
            self.error(f"expected {text!r}, found '{shown}'", tok)

    def parse(self) -> Expr:
        e = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            self.error(f"unexpected trailing input {tok.text!r}")
        return e

    def expression(self, min_bp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op":
                break
            bp = {"+": _BP_ADD, "-": _BP_ADD, "*": _BP_MUL, "/": _BP_MUL,
                  "^": _BP_POW}.get(tok.text)
            if bp is None or bp <= min_bp:
                break
            self.advance()
            if tok.text == "^":
                right = self.expression(_BP_POW - 1)  # right associative
                left = self.power(left, right, tok)
            else:
                right = self.expression(bp)
                if tok.text == "+":
                    left = add(left, right)
                elif tok.text == "-":
                    left = add(left, mul(num(-1), right))
                elif tok.text == "*":
                    left = mul(left, right)
                else:
                    left = mul(left, pow_(right, -1))
        return left

    def power(self, base: Expr, exponent: Expr, tok) -> Expr:
        if not (isinstance(exponent, Num) and exponent.is_exact
                and exponent.value.denominator == 1):
            self.error("exponent must be an integer constant", tok)
        try:
            return pow_(base, int(exponent.value))
        except Exception as exc:
            self.error(str(exc), tok)

    def prefix(self) -> Expr:
        tok = self.advance()
        if tok.kind == "number":
            return num(_number(tok.text))
        if tok.kind == "name":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownFunction(
                        f"unknown function '{tok.text}' "
                        f"(line {tok.line}, column {tok.column})"
                    )
                self.advance()
                arg = self.expression(0)
                self.expect(")")
                return fun(tok.text, arg)
            return sym(tok.text)
        if tok.kind == "op" and tok.text == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        if tok.kind == "op" and tok.text == "-":
            return mul(num(-1), self.expression(_BP_NEG))
        if tok.kind == "end":
            self.error("unexpected end of input", tok)
        self.error(f"unexpected token {tok.text!r}", tok)


def parse_expr(source: str) -> Expr:
    """Parse infix source into a canonical expression tree."""
    return _Parser(_tokenize(source)).parse()
