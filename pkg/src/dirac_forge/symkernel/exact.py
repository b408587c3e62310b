"""Exact-total-derivative detection and reconstruction of the primitive."""

from __future__ import annotations

from collections import namedtuple

from .atoms import Atom, AtomKind
from .calculus import d_dtau, euler_operator, families
from .expr import ZERO, Expr
from .poly import Poly

ExactnessResult = namedtuple("ExactnessResult", ["primitive", "residuals"])


class OutsideFragmentError(ValueError):
    pass


def _check_fragment(e: Expr) -> None:
    bad = [a.display for a in e.atoms() if a.kind in (AtomKind.MOMENTUM, AtomKind.MULTIPLIER)]
    if bad:
        raise OutsideFragmentError(f"phase-space atoms {sorted(bad)} are outside the exactness fragment")
    for a in e.den.atoms():
        if a.is_time_dependent and a.order:
            raise OutsideFragmentError(f"derivative atom {a.display} in a denominator")
        if a.kind is AtomKind.TIME:
            raise OutsideFragmentError("explicit evolution parameter in a denominator")
    if any(a.is_time_dependent for a in e.den.atoms()):
        # only (parameter polynomial) x (monomial in tau-dependent atoms) is supported
        phase = {a for a in e.den.atoms() if a.is_time_dependent}
        parts = e.den.coefficients_in(phase)
        if len(parts) != 1:
            raise OutsideFragmentError(f"denominator {Expr(e.den, canonical=True)} is not a monomial in tau-dependent atoms")


def _integrate_tau(p: Poly, den: Poly) -> Expr:
    tau = None
    out = {}
    for m, c in p.terms.items():
        n = 0
        rest = []
        for a, k in m:
            if a.kind is AtomKind.TIME:
                tau, n = a, k
            else:
                rest.append((a, k))
        if tau is None:
            tau = Atom.time()
        key = tuple(sorted(rest + [(tau, n + 1)], key=lambda it: it[0].sort_key))
        out[key] = out.get(key, 0) + c / (n + 1)
    return Expr(Poly({m: c for m, c in out.items() if c}), den)


def _integrate_in(A: Expr, s: Atom) -> Expr:
    """Antiderivative of ``A`` in the single atom ``s`` (Laurent terms, no logarithm)."""
    parts = A.den.coefficients_in({s})
    if len(parts) != 1:
        raise OutsideFragmentError(f"denominator of {A} is not a monomial in {s.display}")
    (smono, d0), = parts.items()
    m = dict(smono).get(s, 0)
    rest = Expr(d0, canonical=False)
    out = ZERO
    for mono, c in A.num.coefficients_in({s}).items():
        k = dict(mono).get(s, 0) - m + 1
        if k == 0:
            raise OutsideFragmentError(f"primitive of {A} in {s.display} needs a logarithm")
        out = out + Expr(c) * Expr.of(s) ** k / (rest * k)
    return out


def _top_order_primitive(e: Expr) -> Expr:
    """Peel off the highest derivative atom until only explicit tau dependence remains.

    If ``e = dF/dtau`` then ``e`` is linear in its top-order atom ``u^(k)`` with
    coefficient ``dF/du^(k-1)``; integrating that coefficient and subtracting the
    total derivative removes ``u^(k)`` for good.
    """
    F = ZERO
    r = e
    for _ in range(10_000):
        if r.is_zero:
            return F
        dep = [a for a in r.atoms() if a.is_time_dependent]
        if not dep:
            if any(a.kind is AtomKind.TIME for a in r.den.atoms()):
                raise OutsideFragmentError(f"explicit evolution parameter in the denominator of {r}")
            return F + _integrate_tau(r.num, r.den)
        top = max(dep, key=lambda a: (a.order, a.sort_key))
        if top.order == 0:
            raise ArithmeticError(f"remainder {r} is not a total derivative")
        if top in r.den.atoms() or r.num.degree(top) != 1:
            raise ArithmeticError(f"remainder is not linear in its top-order atom {top.display}")
        A = r.diff(top)
        if any(a.is_time_dependent and a.order >= top.order for a in A.atoms()):
            raise ArithmeticError(f"coefficient of {top.display} involves order-{top.order} atoms")
        G = _integrate_in(A, top.with_order(top.order - 1))
        F = F + G
        r = r - d_dtau(G)
    raise ArithmeticError("primitive reconstruction did not terminate")


def exact_total_derivative(e: Expr) -> ExactnessResult:
    """Find ``F`` with ``d_dtau(F) == e``.

    Returns ``(F, {})`` on success and ``(None, residuals)`` when some Euler
    operator does not annihilate ``e``; residuals are keyed by family name.
    """
    _check_fragment(e)
    residuals = {}
    for base in families(e.atoms()):
        r = euler_operator(e, base)
        if not r.is_zero:
            residuals[base.name] = r
    if residuals:
        return ExactnessResult(None, residuals)
    if e.is_zero:
        return ExactnessResult(ZERO, {})
    F = _top_order_primitive(e)
    if not (d_dtau(F) - e).is_zero:
        raise ArithmeticError(f"primitive reconstruction failed to certify for {e}")
    return ExactnessResult(F, {})
