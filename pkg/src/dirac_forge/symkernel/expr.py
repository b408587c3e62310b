"""Canonical rational expressions over atoms."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

from .atoms import Atom, AtomKind
from .poly import Monomial, Poly, cancel_common


class ZeroDenominatorError(ZeroDivisionError):
    pass


class Expr:
    """A reduced fraction ``num / den`` of sparse polynomials.

    Normal form: ``gcd(num, den) = 1`` and the leading (graded-lex) coefficient
    of ``den`` is 1.  Two mathematically equal expressions therefore compare
    equal with ``==`` and hash identically.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Poly, den: Poly | None = None, *, canonical: bool = False):
        if den is None:
            den = Poly.const(1)
        if not canonical:
            num, den = _normalize(num, den)
        self.num = num
        self.den = den
        self._hash = None

    # construction --------------------------------------------------------
    @staticmethod
    def const(c) -> "Expr":
        return Expr(Poly.const(c), Poly.const(1), canonical=True)

    @staticmethod
    def of(a: Atom) -> "Expr":
        return Expr(Poly.atom(a), Poly.const(1), canonical=True)

    @staticmethod
    def lift(x) -> "Expr":
        if isinstance(x, Expr):
            return x
        if isinstance(x, Atom):
            return Expr.of(x)
        if isinstance(x, (int, Rational, Fraction)):
            return Expr.const(x)
        if isinstance(x, str):
            try:
                return Expr.const(Fraction(x))
            except ValueError:
                pass
        raise TypeError(f"cannot convert {type(x).__name__} to Expr")

    # queries -------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.num.is_zero()

    @property
    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    @property
    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant:
            raise ValueError(f"{self} is not constant")
        return self.num.constant_value()

    def atoms(self) -> set[Atom]:
        return self.num.atoms() | self.den.atoms()

    def has_kind(self, *kinds: AtomKind) -> bool:
        return any(a.kind in kinds for a in self.atoms())

    def numerator(self) -> "Expr":
        return Expr(self.num, canonical=True)

    def denominator(self) -> "Expr":
        return Expr(self.den, canonical=True)

    def degree(self, atom: Atom) -> int:
        if atom in self.den.atoms():
            raise ValueError(f"{atom} appears in a denominator")
        return max(self.num.degree(atom), 0)

    def degree_in(self, atoms: Iterable[Atom]) -> int:
        s = set(atoms)
        if s & self.den.atoms():
            raise ValueError("atoms appear in a denominator")
        return max(self.num.degree_in(s), 0)

    def linear_split(self, atom: Atom) -> tuple["Expr", "Expr"] | None:
        """``(c, r)`` with ``self == c*atom + r`` and ``c, r`` free of ``atom``; None if nonlinear."""
        if atom in self.den.atoms() or self.num.degree(atom) > 1:
            return None
        parts = self.num.coefficients_in({atom})
        one = ((atom, 1),)
        c = Expr(parts.get(one, Poly()), self.den)
        r = Expr(parts.get((), Poly()), self.den)
        return c, r

    def coefficients(self, atoms: Iterable[Atom]) -> dict[Monomial, "Expr"]:
        """Collect the numerator by monomials in ``atoms`` (which must not occur in the denominator)."""
        s = set(atoms)
        if s & self.den.atoms():
            raise ValueError("atoms appear in a denominator")
        return {m: Expr(p, self.den) for m, p in self.num.coefficients_in(s).items()}

    # arithmetic ----------------------------------------------------------
    def __add__(self, other) -> "Expr":
        try:
            o = Expr.lift(other)
        except TypeError:
            return NotImplemented
        if self.den == o.den:
            return Expr(self.num + o.num, self.den)
        return Expr(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr(-self.num, self.den, canonical=True)

    def __pos__(self) -> "Expr":
        return self

    def __sub__(self, other) -> "Expr":
        try:
            o = Expr.lift(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other) -> "Expr":
        return Expr.lift(other) - self

    def __mul__(self, other) -> "Expr":
        try:
            o = Expr.lift(other)
        except TypeError:
            return NotImplemented
        if self.is_zero or o.is_zero:
            return ZERO
        return Expr(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Expr":
        try:
            o = Expr.lift(other)
        except TypeError:
            return NotImplemented
        if o.is_zero:
            raise ZeroDenominatorError("division by the zero expression")
        return Expr(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other) -> "Expr":
        return Expr.lift(other) / self

    def __pow__(self, n: int) -> "Expr":
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        if n >= 0:
            return Expr(self.num**n, self.den**n, canonical=n > 0) if n else ONE
        if self.is_zero:
            raise ZeroDenominatorError("negative power of zero")
        return Expr(self.den ** (-n), self.num ** (-n))

    # calculus and substitution --------------------------------------------
    def diff(self, atom: Atom) -> "Expr":
        dn = self.num.diff(atom)
        if atom not in self.den.atoms():
            return Expr(dn, self.den)
        dd = self.den.diff(atom)
        return Expr(dn * self.den - self.num * dd, self.den * self.den)

    def substitute(self, mapping: Mapping[Atom, "Expr"]) -> "Expr":
        if not mapping or not (self.atoms() & mapping.keys()):
            return self
        return _subs_poly(self.num, mapping) / _subs_poly(self.den, mapping)

    def evaluate(self, values: Mapping[Atom, Fraction]) -> Fraction:
        """Exact value at a rational point (all atoms must be bound)."""
        n = self.num.evaluate_partial(values)
        d = self.den.evaluate_partial(values)
        if not (n.is_constant() and d.is_constant()):
            missing = (n.atoms() | d.atoms())
            raise KeyError(f"unbound atoms: {sorted(a.display for a in missing)}")
        dv = d.constant_value()
        if not dv:
            raise ZeroDenominatorError("denominator vanishes at this point")
        return n.constant_value() / dv

    # comparison / printing ------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Expr):
            try:
                other = Expr.lift(other)
            except TypeError:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def __bool__(self) -> bool:
        return not self.is_zero

    def __str__(self) -> str:
        return format_expr(self)

    def __repr__(self) -> str:
        return f"Expr({format_expr(self)!r})"


def _normalize(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    if den.is_zero():
        raise ZeroDenominatorError("zero denominator")
    if num.is_zero():
        return Poly(), Poly.const(1)
    num, den = cancel_common(num, den)
    _, lc = den.leading_term()
    if lc != 1:
        inv = 1 / lc
        num, den = num.scale(inv), den.scale(inv)
    return num, den


def _subs_poly(p: Poly, mapping: Mapping[Atom, Expr]) -> Expr:
    total = ZERO
    powers: dict[tuple[Atom, int], Expr] = {}
    for m, c in p.terms.items():
        kept = []
        term = Expr.const(c)
        for a, e in m:
            if a in mapping:
                key = (a, e)
                if key not in powers:
                    powers[key] = mapping[a] ** e
                term = term * powers[key]
            else:
                kept.append((a, e))
        if kept:
            term = term * Expr(Poly({tuple(kept): Fraction(1)}), canonical=True)
        total = total + term
    return total


ZERO = Expr(Poly(), Poly.const(1), canonical=True)
ONE = Expr(Poly.const(1), Poly.const(1), canonical=True)


# printing -------------------------------------------------------------------

def _factor_order(a: Atom) -> tuple:
    # parameters lead inside a product for readability
    return (0 if a.is_parameter else 1, a.sort_key)


def _format_monomial(m: Monomial) -> str:
    parts = []
    for a, e in sorted(m, key=lambda it: _factor_order(it[0])):
        parts.append(a.display if e == 1 else f"{a.display}^{e}")
    return "*".join(parts)


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: Poly) -> str:
    if p.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(p.ordered_terms()):
        neg = c < 0
        c = abs(c)
        if not m:
            body = _format_coeff(c)
        elif c == 1:
            body = _format_monomial(m)
        else:
            body = f"{_format_coeff(c)}*{_format_monomial(m)}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def _needs_parens(p: Poly) -> bool:
    if len(p.terms) > 1:
        return True
    (m, c), = p.terms.items()
    return c != 1 or len(m) > 1


def _format_over_monomial(num: Poly, den_m: Monomial, den_c: Fraction) -> str:
    # parameter-monomial denominators are distributed over the terms: a - b^2/c^2
    out = []
    for i, (m, c) in enumerate(num.ordered_terms()):
        c = c / den_c
        neg = c < 0
        c = abs(c)
        left = dict(den_m)
        keep = []
        for a, k in m:
            common = min(k, left.get(a, 0))
            left[a] = left.get(a, 0) - common
            if k - common:
                keep.append((a, k - common))
        dm = tuple((a, left[a]) for a, _ in den_m if left[a])
        top = _format_monomial(tuple(keep)) if keep else ""
        if not dm:
            body = format_poly(Poly({tuple(keep): c}))
        else:
            p, q = c.numerator, c.denominator
            nstr = top if (p == 1 and top) else (f"{p}*{top}" if top else str(p))
            dstr = _format_monomial(dm)
            if q != 1:
                dstr = f"{q}*{dstr}"
            if q != 1 or len(dm) > 1:
                dstr = f"({dstr})"
            body = f"{nstr}/{dstr}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def format_expr(e: Expr) -> str:
    if e.den.is_constant():
        return format_poly(e.num)
    if e.den.is_monomial() and all(a.is_parameter for a in e.den.atoms()):
        (dm, dc), = e.den.terms.items()
        return _format_over_monomial(e.num, dm, dc)
    n = format_poly(e.num)
    if len(e.num.terms) > 1:
        n = f"({n})"
    d = format_poly(e.den)
    if _needs_parens(e.den):
        d = f"({d})"
    return f"{n}/{d}"
