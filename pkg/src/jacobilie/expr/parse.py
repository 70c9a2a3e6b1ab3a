"""Recursive-descent parser for the infix expression grammar.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := number | name | fname '(' expr ')' | '(' expr ')'

Exponents must reduce to numeric constants.  Identifiers resolve to
coordinates (``Var``) or declared parameters (``Param``).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

from .nodes import _BUILDERS, FUNCTIONS, Const, Expr, Param, Var, add, mul, power

__all__ = ["ParseError", "UnknownIdentifierError", "parse"]


class ParseError(ValueError):
    """Syntax error; ``offset`` is the byte offset into the UTF-8 source."""

    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.offset = len(text[:pos].encode("utf-8"))
        super().__init__(f"{message} at byte {self.offset}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, text: str, pos: int, declared: Iterable[str]):
        self.name = name
        self.declared = tuple(declared)
        listing = ", ".join(self.declared) or "(none)"
        ParseError.__init__(self, f"unknown identifier {name!r} (declared: {listing})", text, pos)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, coords: Iterable[str], params: Iterable[str]):
        self.text = text
        self.coords = tuple(coords)
        self.params = tuple(params)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {what}", self.text, pos)

    def expr(self) -> Expr:
        out = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            out.append(t if op == "+" else mul(-1, t))
        return out[0] if len(out) == 1 else add(*out)

    def term(self) -> Expr:
        out = [self.unary()]
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op, pos = self.take()[1:]
            f = self.unary()
            if op == "*":
                out.append(f)
            else:
                if isinstance(f, Const) and f.value == 0:
                    raise ParseError("division by zero", self.text, pos)
                out.append(power(f, -1))
        return out[0] if len(out) == 1 else mul(*out)

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            u = self.unary()
            return mul(-1, u) if val == "-" else u
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            start = self.peek()[2]
            n = self.unary()
            if not isinstance(n, Const):
                raise ParseError("exponent must be a numeric constant", self.text, start)
            if isinstance(base, Const) and base.value == 0 and n.value < 0:
                raise ParseError("zero raised to a negative power", self.text, pos)
            return power(base, n.value)
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _BUILDERS[FUNCTIONS[val]](arg)
            if val in self.coords:
                return Var(val)
            if val in self.params:
                return Param(val)
            raise UnknownIdentifierError(val, self.text, pos, self.coords + self.params)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", self.text, pos)


def parse(text: str, coords: Iterable[str] = (), params: Iterable[str] = ()) -> Expr:
    """Parse ``text``; names must be in ``coords`` or ``params``."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    p = _Parser(text, coords, params)
    if p.peek()[0] == "end":
        raise ParseError("empty expression", text, 0)
    e = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", text, pos)
    return e
