"""Sparse multivariate polynomials with exact rational coefficients.

A monomial is a tuple of ``(Atom, exponent)`` pairs sorted by ``Atom.sort_key``;
the empty tuple is the constant monomial.  Polynomials are immutable by
convention: every operation returns a new object.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .atoms import Atom

Monomial = tuple  # tuple[tuple[Atom, int], ...]
ONE_MONO: Monomial = ()


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for atom, e in b:
        d[atom] = d.get(atom, 0) + e
    return tuple(sorted(d.items(), key=lambda it: it[0].sort_key))


def mono_div(a: Monomial, b: Monomial) -> Monomial | None:
    """a / b when b divides a, else None."""
    d = dict(a)
    for atom, e in b:
        have = d.get(atom, 0)
        if have < e:
            return None
        if have == e:
            del d[atom]
        else:
            d[atom] = have - e
    return tuple(sorted(d.items(), key=lambda it: it[0].sort_key))


def mono_gcd(a: Monomial, b: Monomial) -> Monomial:
    db = dict(b)
    out = [(atom, min(e, db[atom])) for atom, e in a if atom in db]
    return tuple(out)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def grlex_key(m: Monomial, ranks: dict[Atom, int]) -> tuple:
    exps = [0] * len(ranks)
    for atom, e in m:
        exps[ranks[atom]] = e
    return (mono_degree(m), tuple(exps))


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict[Monomial, Fraction] = terms if terms is not None else {}

    # constructors -------------------------------------------------------
    @staticmethod
    def const(c) -> "Poly":
        c = Fraction(c)
        return Poly({ONE_MONO: c} if c else {})

    @staticmethod
    def atom(a: Atom, power: int = 1) -> "Poly":
        return Poly({((a, power),): Fraction(1)})

    # queries -------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and ONE_MONO in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get(ONE_MONO, Fraction(0))

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def atoms(self) -> set[Atom]:
        return {a for m in self.terms for a, _ in m}

    def degree(self, atom: Atom | None = None) -> int:
        if not self.terms:
            return -1
        if atom is None:
            return max(mono_degree(m) for m in self.terms)
        return max(dict(m).get(atom, 0) for m in self.terms)

    def degree_in(self, atoms: set[Atom]) -> int:
        if not self.terms:
            return -1
        return max(sum(e for a, e in m if a in atoms) for m in self.terms)

    def ordered_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in descending graded-lex order."""
        ranks = {a: i for i, a in enumerate(sorted(self.atoms(), key=lambda a: a.sort_key))}
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0], ranks), reverse=True)

    def leading_term(self) -> tuple[Monomial, Fraction]:
        return self.ordered_terms()[0]

    def monomial_content(self) -> Monomial:
        it = iter(self.terms)
        g = next(it)
        for m in it:
            g = mono_gcd(g, m)
            if not g:
                break
        return g

    # arithmetic ----------------------------------------------------------
    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if len(other.terms) < len(self.terms):
            self, other = other, self
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                v = out.get(m, 0) + c1 * c2
                if v:
                    out[m] = v
                else:
                    out.pop(m, None)
        return Poly(out)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        if not c:
            return Poly()
        return Poly({m: v * c for m, v in self.terms.items()})

    def mul_monomial(self, mono: Monomial, c=1) -> "Poly":
        c = Fraction(c)
        return Poly({mono_mul(m, mono): v * c for m, v in self.terms.items()})

    def div_monomial(self, mono: Monomial) -> "Poly":
        out = {}
        for m, v in self.terms.items():
            q = mono_div(m, mono)
            if q is None:
                raise ArithmeticError("monomial does not divide polynomial")
            out[q] = v
        return Poly(out)

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def diff(self, atom: Atom) -> "Poly":
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(atom, 0)
            if not e:
                continue
            if e == 1:
                del d[atom]
            else:
                d[atom] = e - 1
            key = tuple(sorted(d.items(), key=lambda it: it[0].sort_key))
            out[key] = out.get(key, 0) + c * e
        return Poly({m: c for m, c in out.items() if c})

    def coefficients_in(self, atoms: set[Atom]) -> dict[Monomial, "Poly"]:
        """Split into {monomial in ``atoms``: coefficient polynomial in the rest}."""
        out: dict[Monomial, dict] = {}
        for m, c in self.terms.items():
            inner = tuple((a, e) for a, e in m if a in atoms)
            rest = tuple((a, e) for a, e in m if a not in atoms)
            out.setdefault(inner, {})[rest] = c
        return {k: Poly(v) for k, v in out.items()}

    def evaluate_partial(self, values: dict[Atom, Fraction]) -> "Poly":
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            keep = []
            for a, e in m:
                if a in values:
                    c = c * Fraction(values[a]) ** e
                else:
                    keep.append((a, e))
            if not c:
                continue
            k = tuple(keep)
            out[k] = out.get(k, 0) + c
        return Poly({m: c for m, c in out.items() if c})

    # comparison ----------------------------------------------------------
    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        return f"Poly({self.terms!r})"


def poly_sum(polys: Iterable[Poly]) -> Poly:
    out = Poly()
    for p in polys:
        out = out + p
    return out


# gcd over Q via sympy's sparse rings --------------------------------------

def _to_ring(polys: list[Poly]):
    from sympy import QQ, Symbol
    from sympy.polys.orderings import grlex
    from sympy.polys.rings import ring

    atoms = sorted(set().union(*(p.atoms() for p in polys)), key=lambda a: a.sort_key)
    idx = {a: i for i, a in enumerate(atoms)}
    R, *_ = ring([Symbol(f"_z{i}") for i in range(len(atoms))], QQ, grlex)
    out = []
    for p in polys:
        d = {}
        for m, c in p.terms.items():
            exps = [0] * len(atoms)
            for a, e in m:
                exps[idx[a]] = e
            d[tuple(exps)] = QQ(c.numerator, c.denominator)
        out.append(R.from_dict(d))
    return atoms, out


def _from_ring(atoms: list[Atom], rp) -> Poly:
    terms = {}
    for exps, c in rp.items():
        m = tuple((atoms[i], e) for i, e in enumerate(exps) if e)
        terms[m] = Fraction(int(c.numerator), int(c.denominator))
    return Poly(terms)


def cancel_common(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Remove the polynomial gcd of ``num`` and ``den``."""
    if den.is_constant() or num.is_zero():
        return num, den
    g = mono_gcd(num.monomial_content(), den.monomial_content())
    if g:
        num, den = num.div_monomial(g), den.div_monomial(g)
    if den.is_monomial() or num.is_monomial():
        # the remaining gcd can only be a monomial, and the monomial content is gone
        return num, den
    atoms, (rn, rd) = _to_ring([num, den])
    h, cn, cd = rn.cofactors(rd)
    if h.is_ground:
        return num, den
    return _from_ring(atoms, cn), _from_ring(atoms, cd)


def factor_list(p: Poly) -> tuple[Fraction, list[tuple[Poly, int]]]:
    """Irreducible factorization over Q."""
    atoms, (rp,) = _to_ring([p])
    if not atoms:
        return p.constant_value(), []
    c, facs = rp.factor_list()
    return Fraction(int(c.numerator), int(c.denominator)), [
        (_from_ring(atoms, f), k) for f, k in facs
    ]
