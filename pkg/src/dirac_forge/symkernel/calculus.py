"""Partial and total derivatives, Poisson brackets, Euler operators."""

from __future__ import annotations

from typing import Iterable, Sequence

from .atoms import Atom, AtomKind, AtomTable, AtomTableError
from .expr import ZERO, Expr
from .poly import Poly, mono_mul


class PhaseSpaceError(ValueError):
    pass


def canonical_equal(a: Expr, b: Expr, table: AtomTable | None = None) -> bool:
    """True iff ``a - b`` normalizes to zero."""
    if table is not None:
        table.check(a.atoms() | b.atoms())
    return (a - b).is_zero


def differentiate(e: Expr, a: Atom, table: AtomTable | None = None) -> Expr:
    if table is not None and a not in table:
        raise AtomTableError(f"atom {a.display!r} is not in this atom table")
    return e.diff(a)


def _dt_atom(a: Atom) -> Poly | None:
    if a.kind is AtomKind.TIME:
        return Poly.const(1)
    if a.is_time_dependent:
        return Poly.atom(a.derivative(1))
    if a.kind is AtomKind.PARAMETER:
        return None
    raise PhaseSpaceError(
        f"total derivative of the {a.kind.value} atom {a.display!r} is not defined "
        "on configuration space"
    )


def _dt_poly(p: Poly) -> Poly:
    out: dict = {}
    for m, c in p.terms.items():
        for i, (a, e) in enumerate(m):
            da = _dt_atom(a)
            if da is None:
                continue
            rest = m[:i] + (((a, e - 1),) if e > 1 else ()) + m[i + 1:]
            for dm, dc in da.terms.items():
                key = mono_mul(rest, dm)
                v = out.get(key, 0) + c * e * dc
                if v:
                    out[key] = v
                else:
                    out.pop(key, None)
    return Poly(out)


def d_dtau(e: Expr) -> Expr:
    """Total derivative along the evolution parameter."""
    dn = _dt_poly(e.num)
    if e.den.is_constant():
        return Expr(dn, e.den, canonical=True)
    dd = _dt_poly(e.den)
    if dd.is_zero():
        return Expr(dn, e.den)
    return Expr(dn * e.den - e.num * dd, e.den * e.den)


def d_dtau_n(e: Expr, k: int) -> Expr:
    for _ in range(k):
        e = d_dtau(e)
    return e


def _check_phase(e: Expr, which: str) -> None:
    bad = [a.display for a in e.atoms() if a.kind is AtomKind.DERIVATIVE]
    if bad:
        raise PhaseSpaceError(f"velocity atoms {sorted(bad)} in {which} argument of a Poisson bracket")


def poisson(f: Expr, h: Expr, pairs: Sequence[tuple[Atom, Atom]]) -> Expr:
    """``sum_A (df/dq^A dh/dp_A - df/dp_A dh/dq^A)``."""
    _check_phase(f, "first")
    _check_phase(h, "second")
    fa, ha = f.atoms(), h.atoms()
    total = ZERO
    for q, p in pairs:
        if q in fa and p in ha:
            total = total + f.diff(q) * h.diff(p)
        if p in fa and q in ha:
            total = total - f.diff(p) * h.diff(q)
    return total


def family_orders(e: Expr, base: Atom) -> list[Atom]:
    """Atoms of ``base``'s derivative family present in ``e``, by increasing order."""
    fam = base.family
    return sorted((a for a in e.atoms() if a.is_family and a.family == fam), key=lambda a: a.order)


def euler_operator(e: Expr, base: Atom) -> Expr:
    """``E_u(e) = sum_k (-D)^k de/du^(k)`` for the family of ``base``."""
    total = ZERO
    for a in family_orders(e, base):
        term = e.diff(a)
        k = a.order
        for _ in range(k):
            term = -d_dtau(term)
        total = total + term
    return total


def families(atoms: Iterable[Atom]) -> list[Atom]:
    """Order-0 representatives of the derivative families among ``atoms``."""
    seen = {}
    for a in atoms:
        if a.is_family:
            seen.setdefault(a.family, a.base())
    return sorted(seen.values(), key=lambda a: a.sort_key)


def leibniz_expand(c: Expr, k: int) -> list[tuple[int, Expr]]:
    """Write ``(-D)^k (c * E)`` as ``sum_j c_j D^j E``; returns ``[(j, c_j)]``."""
    # (-D)^k (cE) = (-1)^k sum_j binom(k,j) D^{k-j}(c) D^j E
    out = []
    sign = -1 if k % 2 else 1
    binom = 1
    for j in range(k + 1):
        cj = d_dtau_n(c, k - j) * (sign * binom)
        if not cj.is_zero:
            out.append((j, cj))
        binom = binom * (k - j) // (j + 1)
    return out


__all__ = [
    "PhaseSpaceError",
    "canonical_equal",
    "differentiate",
    "d_dtau",
    "d_dtau_n",
    "poisson",
    "euler_operator",
    "family_orders",
    "families",
    "leibniz_expand",
]
