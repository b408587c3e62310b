"""Reduction modulo constraint surfaces, sign reasoning, constraint normalization.

Constraint surfaces are reduced with a Groebner normal form over the field of
rational functions in the parameters.  A purely triangular substitution does
not give a unique remainder for the spin surface (the value of ``J^2`` depends
on the substitution order), so the normal form is computed against a
Groebner basis of the constraint numerators instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .atoms import Atom, AtomKind, AssumptionSet
from .expr import ONE, ZERO, Expr, ZeroDenominatorError
from .poly import Poly, factor_list


class ReductionError(ArithmeticError):
    pass


class AssumptionError(ArithmeticError):
    """A decision needs a nonvanishing fact the assumption set does not provide."""

    def __init__(self, message: str, needed: str | None = None):
        self.needed = needed
        super().__init__(message)


# sign reasoning ---------------------------------------------------------------

def _term_sign(m, c: Fraction, asm: AssumptionSet) -> int | None:
    """+1/-1 if the term ``c*m`` has a definite sign (and is nonzero), else None.

    0 is returned for terms that are only known non-negative.
    """
    strict = True
    for a, e in m:
        if asm.is_positive(a):
            continue
        if e % 2 == 0:
            if not asm.is_nonzero(a):
                strict = False
            continue
        return None
    s = 1 if c > 0 else -1
    return s if strict else 0


def _sign_definite(p: Poly, asm: AssumptionSet) -> bool:
    signs = []
    for m, c in p.terms.items():
        s = _term_sign(m, c, asm)
        if s is None:
            return False
        signs.append((s, c > 0))
    pos = {cpos for _, cpos in signs}
    if len(pos) != 1:
        return False
    return any(s != 0 for s, _ in signs)


def _poly_known_nonzero(p: Poly, asm: AssumptionSet) -> tuple[bool, str | None]:
    if p.is_zero():
        return False, "expression is identically zero"
    if p.is_constant():
        return True, None
    if p.is_monomial():
        (m, _), = p.terms.items()
        missing = [a.display for a, _ in m if not asm.is_nonzero(a)]
        if not missing:
            return True, None
        return False, " and ".join(f"{n} != 0" for n in missing)
    if _sign_definite(p, asm):
        return True, None
    _, facs = factor_list(p)
    missing = []
    for f, _ in facs:
        if f.is_monomial():
            (m, _), = f.terms.items()
            missing += [f"{a.display} != 0" for a, _ in m if not asm.is_nonzero(a)]
        elif not _sign_definite(f, asm):
            missing.append(f"{_fmt(f)} != 0")
    if missing:
        return False, " and ".join(missing)
    return True, None


def _fmt(p: Poly) -> str:
    return str(Expr(p, canonical=True))


def is_known_nonzero(e: Expr, assumptions: AssumptionSet) -> bool:
    return _poly_known_nonzero(e.num, assumptions)[0]


def require_nonzero(e: Expr, assumptions: AssumptionSet, what: str = "") -> None:
    ok, need = _poly_known_nonzero(e.num, assumptions)
    if not ok:
        ctx = f" ({what})" if what else ""
        raise AssumptionError(f"cannot divide by {e}{ctx}: needs assumption {need}", need)


def missing_assumption(e: Expr, assumptions: AssumptionSet) -> str | None:
    return _poly_known_nonzero(e.num, assumptions)[1]


# Groebner surfaces -----------------------------------------------------------

def _sym(a: Atom):
    from sympy import Symbol

    return Symbol(f"{a.kind.value}|{a.name}|{a.order}")


@dataclass
class _Ring:
    ring: object
    variables: list
    vindex: dict
    params: list
    pindex: dict


def _make_ring(variables: Sequence[Atom], params: Sequence[Atom]) -> _Ring:
    from sympy import QQ
    from sympy.polys.domains import FractionField
    from sympy.polys.orderings import grevlex
    from sympy.polys.rings import PolyRing

    dom = FractionField(QQ, [_sym(a) for a in params]) if params else QQ
    syms = [_sym(a) for a in variables] or [_sym(Atom.time("__dummy"))]
    R = PolyRing(syms, dom, grevlex)
    return _Ring(R, list(variables), {a: i for i, a in enumerate(variables)},
                 list(params), {a: i for i, a in enumerate(params)})


def _to_element(p: Poly, r: _Ring):
    from sympy import QQ

    R = r.ring
    dom = R.domain
    nv = max(len(r.variables), 1)
    buckets: dict[tuple, dict] = {}
    for m, c in p.terms.items():
        vex = [0] * nv
        pex = [0] * len(r.params)
        for a, e in m:
            if a in r.vindex:
                vex[r.vindex[a]] = e
            else:
                pex[r.pindex[a]] = e
        buckets.setdefault(tuple(vex), {})[tuple(pex)] = QQ(c.numerator, c.denominator)
    out = {}
    for vex, pd in buckets.items():
        if r.params:
            F = dom.field
            out[vex] = F.new(F.ring.from_dict(pd), F.ring.one)
        else:
            out[vex] = pd[()]
    return R.from_dict(out)


def _ground_poly(pe, params: list[Atom]) -> Poly:
    terms = {}
    for exps, c in pe.items():
        m = tuple((params[i], e) for i, e in enumerate(exps) if e)
        terms[tuple(sorted(m, key=lambda it: it[0].sort_key))] = Fraction(int(c.numerator), int(c.denominator))
    return Poly(terms)


def _from_element(el, r: _Ring) -> Expr:
    total = ZERO
    for vex, c in el.items():
        vm = tuple((r.variables[i], e) for i, e in enumerate(vex) if e and i < len(r.variables))
        vm = tuple(sorted(vm, key=lambda it: it[0].sort_key))
        if r.params:
            num = _ground_poly(c.numer, r.params)
            den = _ground_poly(c.denom, r.params)
        else:
            num = Poly.const(Fraction(int(c.numerator), int(c.denominator)))
            den = Poly.const(1)
        total = total + Expr(num.mul_monomial(vm), den)
    return total


def _split_atoms(atoms: Iterable[Atom], leading: Sequence[Atom] = ()) -> tuple[list[Atom], list[Atom]]:
    params, variables = [], []
    for a in atoms:
        (params if a.kind is AtomKind.PARAMETER else variables).append(a)
    key = lambda a: a.sort_key  # noqa: E731
    # designated leading atoms come first, so they head the constraints they solve
    first = [a for a in leading if a in variables]
    rest = sorted((a for a in variables if a not in first), key=key)
    return first + rest, sorted(params, key=key)


def designated_leading(constraints: Sequence[Expr]) -> list[Atom]:
    """Per constraint, the first atom it is linear in with a plain-number coefficient."""
    out: list[Atom] = []
    for c in constraints:
        for a in sorted(c.num.atoms(), key=lambda a: a.sort_key):
            if a.is_parameter or a in out or a in c.den.atoms():
                continue
            split = Expr(c.num).linear_split(a)
            if split is not None and split[0].is_constant:
                out.append(a)
                break
    return out


class Surface:
    """An ordered constraint set with a cached Groebner basis.

    Only constraint numerators enter the ideal; denominators are nonzero by
    the assumption invariant.
    """

    def __init__(self, constraints: Iterable[Expr] = (), leading: Sequence[Atom] | None = None):
        self.constraints: tuple[Expr, ...] = tuple(c for c in constraints if not c.is_zero)
        self.leading: tuple[Atom, ...] = tuple(designated_leading(self.constraints) if leading is None else leading)
        self._basis = None
        self._cache: dict = {}

    def extended(self, more: Iterable[Expr]) -> "Surface":
        return Surface(self.constraints + tuple(more))

    def __len__(self) -> int:
        return len(self.constraints)

    def _atoms(self) -> set[Atom]:
        out: set[Atom] = set()
        for c in self.constraints:
            out |= c.num.atoms()
        return out

    def _base(self):
        if self._basis is None:
            from sympy.polys.groebnertools import groebner

            variables, params = _split_atoms(self._atoms(), self.leading)
            r = _make_ring(variables, params)
            gens = [_to_element(c.num, r) for c in self.constraints]
            G = groebner(gens, r.ring)
            if any(g.is_ground and g for g in G):
                raise ReductionError("inconsistent constraint surface (the ideal contains 1)")
            self._basis = (r, G)
        return self._basis

    def _ring_for(self, extra: set[Atom]):
        r0, G0 = self._base()
        variables, params = _split_atoms(self._atoms() | extra, self.leading)
        key = (tuple(variables), tuple(params))
        hit = self._cache.get(key)
        if hit is None:
            if variables == r0.variables and params == r0.params:
                hit = (r0, G0)
            else:
                # the basis stays a basis in a larger ring whose order restricts to the old one
                r = _make_ring(variables, params)
                hit = (r, [g.set_ring(r.ring) for g in G0])
            self._cache[key] = hit
        return hit

    def normal_poly(self, p: Poly) -> Expr:
        if not self.constraints or p.is_zero():
            return Expr(p)
        r, G = self._ring_for(p.atoms())
        if not G:
            return Expr(p)
        el = _to_element(p, r)
        return _from_element(el.rem(G), r)

    def reduce(self, e: Expr) -> Expr:
        if not self.constraints or e.is_zero:
            return e
        n = self.normal_poly(e.num)
        if e.den.is_constant():
            return n / Expr(e.den, canonical=True)
        d = self.normal_poly(e.den)
        if d.is_zero:
            raise ReductionError(f"denominator of {e} vanishes on the constraint surface")
        return n / d

    def contains(self, e: Expr) -> bool:
        return self.reduce(e).is_zero


def reduce_mod(e: Expr, surface: Surface | Sequence[Expr], leading: Sequence[Atom] | None = None) -> Expr:
    """Normal form of ``e`` modulo the constraint surface.

    Atoms in ``leading`` (default: see ``designated_leading``) are eliminated first.
    """
    if not isinstance(surface, Surface):
        surface = Surface(surface, leading)
    return surface.reduce(e)


# parameter relations ------------------------------------------------------------

@dataclass(frozen=True)
class Relation:
    """A rewrite rule ``atom^power -> value`` on parameters (``b^2 = 3*hbar^2/4``)."""

    atom: Atom
    power: int
    value: Expr

    def __str__(self) -> str:
        lhs = self.atom.display if self.power == 1 else f"{self.atom.display}^{self.power}"
        return f"{lhs} = {self.value}"


def _apply_rel_poly(p: Poly, rels: Sequence[Relation]) -> Expr:
    total = ZERO
    for m, c in p.terms.items():
        term = Expr.const(c)
        kept = []
        for a, e in m:
            rel = next((r for r in rels if r.atom == a), None)
            if rel is None or e < rel.power:
                kept.append((a, e))
                continue
            q, rem = divmod(e, rel.power)
            term = term * rel.value**q
            if rem:
                kept.append((a, rem))
        total = total + term * Expr(Poly({tuple(kept): Fraction(1)}), canonical=True)
    return total


def apply_relations(e: Expr, relations: Sequence[Relation]) -> Expr:
    if not relations or not (e.atoms() & {r.atom for r in relations}):
        return e
    out = e
    for _ in range(8):
        nxt = _apply_rel_poly(out.num, relations) / _apply_rel_poly(out.den, relations)
        if nxt == out:
            break
        out = nxt
    return out


# constraint normalization --------------------------------------------------------

def _phase_split(p: Poly) -> dict:
    """Collect ``p`` by monomials in its non-parameter atoms."""
    phase = {a for a in p.atoms() if a.kind is not AtomKind.PARAMETER}
    return p.coefficients_in(phase)


def _phase_leading(p: Poly):
    parts = _phase_split(p)
    lead = Poly({m: Fraction(1) for m in parts}).leading_term()[0]
    return lead, parts[lead]


def normalize_constraint(e: Expr, assumptions: AssumptionSet) -> Expr:
    """Scale a constraint by known-nonzero factors into a reproducible form.

    Denominators with phase-space atoms and known-nonzero phase-monomial content
    are cleared; the leading phase-monomial coefficient is divided out when it
    is known not to vanish.
    """
    if e.is_zero or e.is_constant:
        return e
    den = e.den
    if any(a.kind is not AtomKind.PARAMETER for a in den.atoms()):
        if not is_known_nonzero(Expr(den, canonical=True), assumptions):
            return e
        den = Poly.const(1)
    num = e.num
    content = num.monomial_content()
    strip = tuple(
        (a, k) for a, k in content if a.kind is not AtomKind.PARAMETER and assumptions.is_nonzero(a)
    )
    if strip:
        num = num.div_monomial(strip)
    out = Expr(num, den)
    if not out.has_kind(*_PHASE_KINDS):
        return out
    _, coeff = _phase_leading(out.num)
    c = Expr(coeff, out.den)
    if is_known_nonzero(c, assumptions):
        out = out / c
    return out


_PHASE_KINDS = tuple(k for k in AtomKind if k is not AtomKind.PARAMETER)


def solve_linear(e: Expr, atom: Atom) -> Expr | None:
    """Solve ``e = 0`` for ``atom`` when ``e`` is linear in it; None otherwise."""
    split = e.linear_split(atom)
    if split is None or split[0].is_zero:
        return None
    c, r = split
    return -r / c


def linear_candidates(e: Expr, assumptions: AssumptionSet) -> list[tuple[Atom, Expr, Expr]]:
    """Atoms ``e`` is linear in, with known-nonzero coefficient: ``(atom, coeff, solution)``."""
    out = []
    for a in sorted(e.atoms(), key=lambda a: a.sort_key):
        if a.kind is AtomKind.PARAMETER:
            continue
        split = e.linear_split(a)
        if split is None or split[0].is_zero:
            continue
        c, r = split
        if a in c.atoms() or not is_known_nonzero(c, assumptions):
            continue
        out.append((a, c, -r / c))
    return out


__all__ = [
    "AssumptionError",
    "ReductionError",
    "Relation",
    "Surface",
    "apply_relations",
    "designated_leading",
    "is_known_nonzero",
    "linear_candidates",
    "missing_assumption",
    "normalize_constraint",
    "reduce_mod",
    "require_nonzero",
    "solve_linear",
    "ZeroDenominatorError",
]
