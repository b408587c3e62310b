"""Lagrangian models: Euler-Lagrange equations, singular Legendre transform, Noether identities."""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .hamiltonian import Constraint, HamiltonianSystem, MultiplierStatus
from .symkernel import (
    ZERO,
    AssumptionError,
    AssumptionSet,
    Atom,
    AtomKind,
    AtomTable,
    Expr,
    Relation,
    Surface,
    d_dtau,
    d_dtau_n,
    leibniz_expand,
    missing_assumption,
    normalize_constraint,
)
from .symkernel.reduce import is_known_nonzero

SECTORS = ("dynamical", "gauge", "auxiliary")


class ModelError(ValueError):
    pass


class LegendreError(ArithmeticError):
    pass


def default_momentum_name(coord: str) -> str:
    return f"p_{coord}"


@dataclass
class ModelSpec:
    """A Lagrangian system over a declared atom table.

    ``table`` holds coordinates, parameters, gauge functions and the momenta of
    every coordinate; momenta default to ``p_<name>``.
    """

    name: str
    table: AtomTable
    coordinates: list[Atom]
    lagrangian: Expr
    assumptions: AssumptionSet = field(default_factory=AssumptionSet)
    metric: list[int] | None = None
    momentum_names: dict[str, str] = field(default_factory=dict)
    multiplier_names: dict[str, str] = field(default_factory=dict)
    relations: list[Relation] = field(default_factory=list)
    values: dict[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        for q in self.coordinates:
            if q.kind is not AtomKind.COORDINATE:
                raise ModelError(f"{q!r} is not a coordinate atom")
            if q.sector not in SECTORS:
                raise ModelError(f"coordinate {q.name} has unknown sector {q.sector!r}")
        missing = [q for q in self.coordinates if self.table.get(q.name) is None]
        if missing:
            self.table = self.table.extend(missing)
        moms = []
        for q in self.coordinates:
            pname = self.momentum_names.get(q.name, default_momentum_name(q.name))
            if self.table.get(pname) is None:
                moms.append(Atom.momentum(pname, q.sector))
        if moms:
            self.table = self.table.extend(moms)
        self._validate_lagrangian(self.lagrangian)

    def _validate_lagrangian(self, L: Expr) -> None:
        names = {q.name for q in self.coordinates}
        for a in L.atoms():
            if a.kind is AtomKind.MOMENTUM or a.kind is AtomKind.MULTIPLIER:
                raise ModelError(f"lagrangian contains the {a.kind.value} atom {a.display}")
            if a.kind is AtomKind.DERIVATIVE and a.order > 1:
                raise ModelError(f"lagrangian contains the higher derivative {a.display}")
            if a.kind in (AtomKind.COORDINATE, AtomKind.DERIVATIVE) and a.name not in names:
                raise ModelError(f"undeclared coordinate {a.name}")
            if a not in self.table:
                raise ModelError(f"undeclared atom {a.display}")

    # lookups -------------------------------------------------------------
    def coordinate(self, name: str) -> Atom:
        for q in self.coordinates:
            if q.name == name:
                return q
        raise KeyError(name)

    def velocity(self, q: Atom) -> Atom:
        return q.derivative(1)

    def momentum(self, q: Atom) -> Atom:
        return self.table[self.momentum_names.get(q.name, default_momentum_name(q.name))]

    def multiplier_name(self, q: Atom) -> str:
        return self.multiplier_names.get(q.name, f"lam_{q.name}")

    def sector(self, name: str) -> list[Atom]:
        return [q for q in self.coordinates if q.sector == name]

    def parameters(self) -> list[Atom]:
        return self.table.of_kind(AtomKind.PARAMETER)

    def gauge_functions(self) -> list[Atom]:
        return self.table.of_kind(AtomKind.GAUGE_FUNCTION)

    def parse(self, text: str) -> Expr:
        from .symkernel import parse_expression

        return parse_expression(text, self.table)

    def with_lagrangian(self, lagrangian: Expr, **changes) -> "ModelSpec":
        return replace(self, lagrangian=lagrangian, **changes)


@dataclass
class VariationalDerivative:
    """``dS/dq^A = dL/dq^A - d/dtau dL/dqdot^A`` per coordinate."""

    components: dict[Atom, Expr]

    def __getitem__(self, key) -> Expr:
        if isinstance(key, str):
            for q, e in self.components.items():
                if q.name == key:
                    return e
            raise KeyError(key)
        return self.components[key]

    def items(self):
        return self.components.items()


def euler_lagrange(model: ModelSpec) -> VariationalDerivative:
    L = model.lagrangian
    out = {}
    for q in model.coordinates:
        out[q] = L.diff(q) - d_dtau(L.diff(q.derivative(1)))
    return VariationalDerivative(out)


# Legendre transform -------------------------------------------------------------

def _gauss_jordan(rows: list[list[Expr]], rhs: list[Expr], assumptions: AssumptionSet):
    """Reduce ``rows | rhs`` with known-nonzero pivots; returns (rows, rhs, pivots)."""
    n = len(rows)
    ncol = len(rows[0]) if rows else 0
    rows = [list(r) for r in rows]
    rhs = list(rhs)
    pivots: dict[int, int] = {}  # column -> row
    used: set[int] = set()
    for col in range(ncol):
        cand = [r for r in range(n) if r not in used and not rows[r][col].is_zero]
        if not cand:
            continue
        good = [r for r in cand if is_known_nonzero(rows[r][col], assumptions)]
        if not good:
            r = cand[0]
            need = missing_assumption(rows[r][col], assumptions)
            raise AssumptionError(
                f"velocity Hessian pivot {rows[r][col]} needs assumption {need}", need
            )
        r = good[0]
        piv = rows[r][col]
        rows[r] = [x / piv for x in rows[r]]
        rhs[r] = rhs[r] / piv
        for o in range(n):
            if o != r and not rows[o][col].is_zero:
                f = rows[o][col]
                rows[o] = [x - f * y for x, y in zip(rows[o], rows[r])]
                rhs[o] = rhs[o] - f * rhs[r]
        pivots[col] = r
        used.add(r)
    return rows, rhs, pivots


def legendre(model: ModelSpec) -> HamiltonianSystem:
    """Singular Legendre transform with primary constraints from the Hessian null space."""
    L = model.lagrangian
    qs = model.coordinates
    vels = [q.derivative(1) for q in qs]
    velset = set(vels)
    if velset & L.den.atoms():
        raise LegendreError("velocities in a denominator are outside the quadratic fragment")
    if L.num.degree_in(velset) > 2:
        raise LegendreError("lagrangian is cubic or higher in the velocities")
    mom_defs = [L.diff(v) for v in vels]
    W = [[pd.diff(v) for v in vels] for pd in mom_defs]
    zero_v = {v: ZERO for v in vels}
    c = [pd.substitute(zero_v) for pd in mom_defs]
    P = [model.momentum(q) for q in qs]
    rhs = [Expr.of(p) - ci for p, ci in zip(P, c)]
    rows, rhs, pivots = _gauss_jordan(W, rhs, model.assumptions)

    solved: dict[Atom, Expr] = {}
    for col, r in pivots.items():
        expr = rhs[r]
        for j, v in enumerate(vels):
            if j != col and not rows[r][j].is_zero:
                expr = expr - rows[r][j] * Expr.of(v)
        solved[vels[col]] = expr
    pivot_rows = set(pivots.values())
    primaries = []
    prim_rows = []
    for r in range(len(rows)):
        if r in pivot_rows:
            continue
        phi = normalize_constraint(rhs[r], model.assumptions)
        if phi.is_zero:
            continue
        if phi.is_constant:
            raise LegendreError(f"inconsistent momentum relations: {rhs[r]} = 0")
        primaries.append(phi)
        prim_rows.append(r)

    free = [v for j, v in enumerate(vels) if j not in pivots]
    hc = sum((Expr.of(p) * Expr.of(v) for p, v in zip(P, vels)), ZERO) - L
    hc = hc.substitute(solved)
    surf = Surface(primaries)
    for v in free:
        coeff = hc.diff(v)
        if not surf.reduce(coeff).is_zero:
            raise LegendreError(f"canonical Hamiltonian depends on the free velocity {v.display} off the primary surface")
    h0 = hc.substitute({v: ZERO for v in free})
    for v, e in list(solved.items()):
        solved[v] = e.substitute({u: ZERO for u in free})

    constraints = []
    multipliers = []
    for phi, r in zip(primaries, prim_rows):
        constraints.append(Constraint(phi, 1, origin=f"null direction of the velocity Hessian ({qs[r].name})"))
        lam = Atom.multiplier(model.multiplier_name(qs[r]))
        multipliers.append(MultiplierStatus(lam, phi))
    return HamiltonianSystem(
        pairs=list(zip(qs, P)),
        h0=h0,
        constraints=constraints,
        multipliers=multipliers,
        assumptions=model.assumptions,
        model=model,
        momenta={p: d for p, d in zip(P, mom_defs)},
        velocities=solved,
        relations=list(model.relations),
    )


def hessian_rank(model: ModelSpec) -> int:
    vels = [q.derivative(1) for q in model.coordinates]
    W = [[model.lagrangian.diff(u).diff(v) for v in vels] for u in vels]
    _, _, piv = _gauss_jordan(W, [ZERO] * len(vels), model.assumptions)
    return len(piv)


# local transformations and Noether identities ----------------------------------

@dataclass
class LocalTransformation:
    """``delta q^A = sum_k R^A_(k) alpha^(k)`` for the gauge functions in ``functions``.

    Keys are order-0 coordinate (or momentum) atoms; values are Exprs linear in
    the gauge-function atoms and their derivatives.
    """

    variations: dict[Atom, Expr]
    functions: tuple[Atom, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.functions:
            fams = {}
            for e in self.variations.values():
                for a in e.atoms():
                    if a.kind is AtomKind.GAUGE_FUNCTION:
                        fams.setdefault(a.name, a.base())
            self.functions = tuple(sorted(fams.values(), key=lambda a: a.sort_key))
        names = {f.name for f in self.functions}
        for q, e in self.variations.items():
            if q.order:
                raise ModelError("variations are declared on order-0 atoms")
            gauge_atoms = {a for a in e.atoms() if a.kind is AtomKind.GAUGE_FUNCTION}
            stray = {a.name for a in gauge_atoms} - names
            if stray:
                raise ModelError(f"variation of {q.display} uses undeclared gauge functions {sorted(stray)}")
            if gauge_atoms and e.degree_in(gauge_atoms) > 1:
                raise ModelError(f"variation of {q.display} is not linear in the gauge functions")

    def __getitem__(self, q: Atom) -> Expr:
        return self.variations.get(q.base() if q.order else q, ZERO)

    @property
    def max_order(self) -> int:
        orders = [a.order for e in self.variations.values() for a in e.atoms() if a.kind is AtomKind.GAUGE_FUNCTION]
        return max(orders, default=0)

    def vary(self, e: Expr) -> Expr:
        """First-order variation of ``e``: ``sum_a de/da * D^k(delta base(a))``."""
        total = ZERO
        for a in sorted(e.atoms(), key=lambda a: a.sort_key):
            if a.kind in (AtomKind.COORDINATE, AtomKind.DERIVATIVE):
                base = a.base()
            elif a.kind is AtomKind.MOMENTUM and a.order == 0:
                base = a
            else:
                continue
            d = self.variations.get(base)
            if d is None or d.is_zero:
                continue
            total = total + e.diff(a) * d_dtau_n(d, a.order)
        return total

    def generator(self, q: Atom, fn: Atom, k: int) -> Expr:
        """``R^q_(k)`` for gauge function ``fn``."""
        e = self.variations.get(q, ZERO)
        split = e.linear_split(fn.with_order(k))
        return split[0] if split else ZERO

    def generators(self, fn: Atom) -> dict[Atom, list[tuple[int, Expr]]]:
        out = {}
        for q, e in self.variations.items():
            ks = sorted({a.order for a in e.atoms() if a.kind is AtomKind.GAUGE_FUNCTION and a.name == fn.name})
            lst = [(k, self.generator(q, fn, k)) for k in ks]
            lst = [(k, r) for k, r in lst if not r.is_zero]
            if lst:
                out[q] = lst
        return out

    def renamed(self, mapping: Mapping[Atom, Expr]) -> "LocalTransformation":
        return LocalTransformation({q: e.substitute(mapping) for q, e in self.variations.items()}, (), self.name)


NoetherResult = namedtuple("NoetherResult", ["ok", "residual"])


def noether_identity(model: ModelSpec, coefficients: Mapping) -> NoetherResult:
    """Apply ``sum_A sum_k c_{A,k} D^k`` to the variational derivatives.

    ``coefficients`` maps a coordinate atom (or its name) to ``[(k, c), ...]``.
    """
    el = euler_lagrange(model)
    total = ZERO
    for key, terms in coefficients.items():
        EA = el[key]
        for k, c in terms:
            c = Expr.lift(c)
            if c.is_zero:
                continue
            total = total + c * d_dtau_n(EA, k)
    return NoetherResult(total.is_zero, total)


def noether_coefficients(t: LocalTransformation, fn: Atom | None = None) -> dict[Atom, list[tuple[int, Expr]]]:
    """Operator of the Noether identity induced by ``t``: ``sum_k (-D)^k (R_(k) E)``."""
    if fn is None:
        if len(t.functions) != 1:
            raise ModelError("choose a gauge function for a multi-parameter transformation")
        fn = t.functions[0]
    out: dict[Atom, list[tuple[int, Expr]]] = {}
    for q, gens in t.generators(fn).items():
        acc: dict[int, Expr] = {}
        for k, R in gens:
            for j, c in leibniz_expand(R, k):
                acc[j] = acc.get(j, ZERO) + c
        out[q] = [(j, c) for j, c in sorted(acc.items()) if not c.is_zero]
    return out


__all__ = [
    "ModelSpec",
    "ModelError",
    "LegendreError",
    "VariationalDerivative",
    "LocalTransformation",
    "NoetherResult",
    "euler_lagrange",
    "legendre",
    "hessian_rank",
    "noether_identity",
    "noether_coefficients",
]
