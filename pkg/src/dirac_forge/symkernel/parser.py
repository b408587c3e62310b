"""Recursive-descent parser for the expression grammar.

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' signed_int)?
    primary := NUMBER | IDENT index? primes? | '(' expr ')'

Identifiers may carry an integer index (``v[2]``) and trailing primes
(``x'``, ``v[1]''``).  ``xdot`` / ``xddot`` resolve through the atom table.
Exponents are integers, optionally negative and optionally parenthesized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .atoms import AtomTable, AtomTableError
from .expr import Expr, ZeroDenominatorError


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.text = text
        self.pos = pos
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\[\s*-?\d+\s*\])?)(?P<primes>'*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int
    primes: int = 0


def tokenize(text: str) -> list[_Tok]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", text, i)
        kind = m.lastgroup if m.lastgroup != "primes" else "ident"
        if m.group("ws") is None:
            if m.group("ident") is not None:
                ident = re.sub(r"\s+", "", m.group("ident"))
                out.append(_Tok("ident", ident, i, len(m.group("primes"))))
            else:
                out.append(_Tok(kind, m.group(0), i))
        i = m.end()
    out.append(_Tok("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, table: AtomTable):
        self.text = text
        self.table = table
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text:
            self.fail(f"expected {text!r}")
        self.take()

    def fail(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"{msg}, found {found}", self.text, t.pos)

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise ParseError("empty expression", self.text, 0)
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("unexpected token")
        return e

    def expr(self) -> Expr:
        acc = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> Expr:
        acc = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op.text == "*":
                acc = acc * rhs
            else:
                if rhs.is_zero:
                    raise ParseError("division by zero", self.text, op.pos)
                acc = acc / rhs
        return acc

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.take()
            return -self.unary()
        if self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.text != "^":
            return base
        op = self.take()
        n = self.exponent()
        if n < 0 and base.is_zero:
            raise ParseError("negative power of zero", self.text, op.pos)
        return base**n

    def exponent(self) -> int:
        if self.tok.text == "(":
            self.take()
            n = self.exponent()
            self.expect(")")
            return n
        sign = 1
        while self.tok.text in ("-", "+"):
            if self.take().text == "-":
                sign = -sign
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.fail("expected an integer exponent")
        self.take()
        return sign * int(t.text)

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.take()
            return Expr.const(Fraction(t.text))
        if t.kind == "ident":
            self.take()
            try:
                return Expr.of(self.table.lookup(t.text, t.primes))
            except AtomTableError as exc:
                raise ParseError(str(exc), self.text, t.pos) from None
        if t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected a number, identifier or '('")


def parse_expression(text: str, symbols: AtomTable) -> Expr:
    """Parse ``text`` into a canonical Expr over the declared atoms."""
    try:
        return _Parser(text, symbols).parse()
    except ZeroDenominatorError as exc:
        raise ParseError(f"division by zero ({exc})", text) from None
