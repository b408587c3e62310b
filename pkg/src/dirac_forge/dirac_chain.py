"""Dirac-Bergmann stabilization, constraint classification and gauge fixing."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

from .hamiltonian import Constraint, HamiltonianSystem, MultiplierStatus, total_hamiltonian
from .mechmodel import LocalTransformation
from .symkernel import (
    ZERO,
    AssumptionError,
    Atom,
    AtomKind,
    Expr,
    Surface,
    apply_relations,
    linear_candidates,
    missing_assumption,
    normalize_constraint,
    poisson,
)
from .symkernel.reduce import is_known_nonzero


class ChainError(ArithmeticError):
    pass


class GaugeFixError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionRecord:
    stage: int  # stage of the constraint whose consistency was imposed
    source: Expr
    condition: Expr
    reduced: Expr
    outcome: str  # zero | multiplier | constraint
    result: Expr | None = None
    multiplier: Atom | None = None
    certificate: bool = False


@dataclass
class ChainReport:
    records: list[ConditionRecord]
    termination: str
    system: HamiltonianSystem

    @property
    def stages(self) -> dict[int, list[ConditionRecord]]:
        out: dict[int, list[ConditionRecord]] = {}
        for r in self.records:
            out.setdefault(r.stage, []).append(r)
        return out

    @property
    def max_stage(self) -> int:
        return max(c.stage for c in self.system.constraints)


def _solved_form(e: Expr, hs: HamiltonianSystem):
    cands = linear_candidates(e, hs.assumptions)
    if not cands:
        return None
    a, _, sol = cands[0]
    return (a, sol)


def _phase_free(e: Expr) -> bool:
    return all(a.kind is AtomKind.PARAMETER for a in e.atoms())


def stabilize(hs: HamiltonianSystem) -> ChainReport:
    """Impose ``{Phi, H_T} ~ 0`` breadth-first until nothing new appears."""
    if not hs.primaries():
        raise ChainError("stabilize needs at least one primary constraint")
    constraints = list(hs.constraints)
    order = [m.name for m in hs.multipliers]
    determined: dict[Atom, Expr] = dict(hs.determined())
    H = total_hamiltonian(hs)
    records: list[ConditionRecord] = []
    surf = Surface([c.expr for c in constraints])

    def run(i: int, certificate: bool) -> bool:
        nonlocal surf
        c = constraints[i]
        h = H.substitute(determined) if determined else H
        raw = poisson(c.expr, h, hs.pairs)
        red = surf.reduce(raw)
        if red.is_zero:
            if not certificate:
                records.append(ConditionRecord(c.stage, c.expr, raw, red, "zero"))
            return False
        mults = [a for a in red.atoms() if a.kind is AtomKind.MULTIPLIER]
        if mults:
            if set(mults) & red.den.atoms() or red.num.degree_in(set(mults)) > 1:
                raise ChainError(f"consistency condition {red} is nonlinear in the multipliers")
            chosen = None
            needs = []
            for lam in reversed(order):
                if lam not in mults:
                    continue
                coeff, _ = red.linear_split(lam)
                coeff = surf.reduce(coeff)
                if is_known_nonzero(coeff, hs.assumptions):
                    chosen = lam
                    break
                needs.append(missing_assumption(coeff, hs.assumptions))
            if chosen is None:
                raise AssumptionError(
                    f"condition {red} determines no multiplier: needs {' or '.join(n for n in needs if n)}",
                    needs[0] if needs else None,
                )
            coeff, rest = red.linear_split(chosen)
            val = surf.reduce(-rest / coeff)
            for k in list(determined):
                determined[k] = surf.reduce(determined[k].substitute({chosen: val}))
            determined[chosen] = val
            records.append(ConditionRecord(c.stage, c.expr, raw, red, "multiplier", val, chosen, certificate))
            return True
        if _phase_free(red):
            raise ChainError(f"inconsistent dynamics: consistency of {c.expr} requires {red} = 0")
        phi = normalize_constraint(red, hs.assumptions)
        new = Constraint(
            phi,
            c.stage + 1,
            solved_form=None,
            origin=f"consistency of {c.expr}",
        )
        new = replace(new, solved_form=_solved_form(phi, hs))
        constraints.append(new)
        surf = surf.extended([phi])
        records.append(ConditionRecord(c.stage, c.expr, raw, red, "constraint", phi, None, certificate))
        queue.append(len(constraints) - 1)
        return True

    queue = deque(range(len(constraints)))
    certificate = False
    while True:
        while queue:
            run(queue.popleft(), certificate)
        # termination certificate: re-check every condition on the final surface
        changed = False
        certificate = True
        for i in range(len(constraints)):
            if run(i, True):
                changed = True
        if not changed and not queue:
            break

    multipliers = [
        MultiplierStatus(m.name, m.constraint, "determined", determined[m.name])
        if m.name in determined else m
        for m in hs.multipliers
    ]
    system = hs.evolve(constraints=constraints, multipliers=multipliers)
    if any(m.is_arbitrary for m in multipliers):
        reason = "all conditions reduce to zero"
    else:
        reason = "all multipliers determined and no new constraints"
    return ChainReport(records, reason, system)


# classification ------------------------------------------------------------------

@dataclass
class Classification:
    system: HamiltonianSystem
    matrix: list[list[Expr]]
    caveats: list[str] = field(default_factory=list)


def bracket_matrix(hs: HamiltonianSystem, surf: Surface | None = None) -> list[list[Expr]]:
    exprs = hs.exprs()
    surf = surf or Surface(exprs)
    n = len(exprs)
    M = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            b = surf.reduce(poisson(exprs[i], exprs[j], hs.pairs))
            M[i][j] = b
            M[j][i] = -b
    return M


def classify_detail(hs: HamiltonianSystem) -> Classification:
    exprs = hs.exprs()
    n = len(exprs)
    surf = Surface(exprs)
    delta = bracket_matrix(hs, surf)
    M = [list(r) for r in delta]
    pivots: dict[int, int] = {}
    used: set[int] = set()
    caveats = []
    # later constraints are paired first, so the surviving free columns are the
    # earliest (typically primary) directions
    for col in reversed(range(n)):
        cand = [r for r in range(n) if r not in used and not M[r][col].is_zero]
        if not cand:
            continue
        known = [r for r in cand if is_known_nonzero(M[r][col], hs.assumptions)]
        r = (known or cand)[-1]
        piv = M[r][col]
        if not is_known_nonzero(piv, hs.assumptions):
            caveats.append(f"classification assumes {piv} != 0 on the constraint surface")
        M[r] = [surf.reduce(x / piv) for x in M[r]]
        for o in range(n):
            if o != r and not M[o][col].is_zero:
                f = M[o][col]
                M[o] = [surf.reduce(x - f * y) for x, y in zip(M[o], M[r])]
        pivots[col] = r
        used.add(r)
    out = []
    for j, c in enumerate(hs.constraints):
        if j in pivots:
            out.append(c.with_class("second"))
            continue
        form = exprs[j]
        for col, r in pivots.items():
            coeff = surf.reduce(-M[r][j])
            if not coeff.is_zero:
                form = form + coeff * exprs[col]
        fcf = None if form == exprs[j] else form
        out.append(c.with_class("first", fcf))
    return Classification(hs.evolve(constraints=out), delta, caveats)


def classify(hs: HamiltonianSystem) -> HamiltonianSystem:
    res = classify_detail(hs)
    sys = res.system
    sys.notes = list(sys.notes) + [c for c in res.caveats if c not in sys.notes]
    return sys


# gauge fixing ----------------------------------------------------------------------

@dataclass
class GaugeFixResult:
    system: HamiltonianSystem
    relations: list[Expr]
    eliminated: list[tuple[Atom, Expr]]
    pairings: list[tuple[Expr, Expr]]
    notes: list[str]


def _numeric_first(cands):
    # prefer a plain number as coefficient, then declaration order
    return sorted(cands, key=lambda t: (not t[1].is_constant,))


def _compose(sub: dict, atom: Atom, value: Expr) -> None:
    value = value.substitute(sub) if sub else value
    for k in list(sub):
        sub[k] = sub[k].substitute({atom: value})
    sub[atom] = value


def fix_gauge(hs: HamiltonianSystem, gauges: Sequence[Expr], sectors: dict | None = None) -> GaugeFixResult:
    """Pair each gauge with one first-class constraint and eliminate the pair."""
    if any(c.klass == "undetermined" for c in hs.constraints):
        hs = classify(hs)
    notes: list[str] = []
    surf = Surface(hs.exprs())
    fcs = [c for c in hs.constraints if c.klass == "first"]
    sub: dict[Atom, Expr] = {}
    removed: set[int] = set()
    pairings = []
    idx = {id(c): i for i, c in enumerate(hs.constraints)}
    for G in gauges:
        partners = []
        for c in fcs:
            form = c.first_class_form or c.expr
            b = surf.reduce(poisson(G, form, hs.pairs))
            if not b.is_zero:
                partners.append(c)
        if not partners:
            raise GaugeFixError(f"gauge {G} commutes with every first-class constraint")
        if len(partners) > 1:
            raise GaugeFixError(
                f"gauge {G} pairs ambiguously with {', '.join(str(c.expr) for c in partners)}"
            )
        partner = partners[0]
        Gs = G.substitute(sub) if sub else G
        cands = [t for t in linear_candidates(Gs, hs.assumptions) if t[0].kind is not AtomKind.MULTIPLIER]
        if not cands:
            raise GaugeFixError(f"gauge {G} is not solvable for any atom with a nonzero coefficient")
        atom, _, val = _numeric_first(cands)[0]
        _compose(sub, atom, val)
        pform = (partner.first_class_form or partner.expr).substitute(sub)
        pc = [t for t in linear_candidates(pform, hs.assumptions)
              if t[0] not in sub and t[0].kind is not AtomKind.MULTIPLIER]
        if pc:
            a2, _, v2 = _numeric_first(pc)[0]
            _compose(sub, a2, v2)
        else:
            notes.append(f"partner {partner.expr} has no solvable atom with a known-nonzero coefficient; it is dropped with its gauge")
        removed.add(idx[id(partner)])
        pairings.append((G, partner.expr))

    # second-class constraints that fix gauge or auxiliary variables
    aux_atoms = set()
    for q, p in hs.pairs:
        sec = (sectors or {}).get(q.name, q.sector)
        if sec in ("gauge", "auxiliary"):
            aux_atoms |= {q, p}
    progress = True
    while progress:
        progress = False
        for i, c in enumerate(hs.constraints):
            if i in removed or c.klass != "second":
                continue
            e = c.expr.substitute(sub)
            if e.is_zero:
                removed.add(i)
                progress = True
                continue
            cands = [t for t in linear_candidates(e, hs.assumptions) if t[0] in aux_atoms and t[0] not in sub]
            if cands:
                a, _, v = _numeric_first(cands)[0]
                _compose(sub, a, v)
                removed.add(i)
                progress = True

    rels = hs.relations
    relations = []
    kept = []
    for i, c in enumerate(hs.constraints):
        if i in removed:
            continue
        e = apply_relations(c.expr.substitute(sub), rels)
        if e.is_zero:
            continue
        if e != c.expr:
            relations.append(e)
        kept.append(Constraint(e, c.stage, "undetermined", _solved_form(e, hs), c.origin))
    gone = set(sub)
    pairs = [(q, p) for q, p in hs.pairs if q not in gone and p not in gone]
    mults = []
    kept_prim = {c.expr for c in kept if c.is_primary}
    for m in hs.multipliers:
        e = apply_relations(m.constraint.substitute(sub), rels)
        if e in kept_prim:
            val = m.value.substitute(sub) if m.value is not None else None
            mults.append(replace(m, constraint=e, value=val))
    h0 = apply_relations(hs.h0.substitute(sub), rels)
    velocities = {v: apply_relations(e.substitute(sub), rels) for v, e in hs.velocities.items()}
    sys = hs.evolve(
        pairs=pairs,
        h0=h0,
        constraints=kept,
        multipliers=mults,
        velocities=velocities,
        notes=list(hs.notes) + notes,
    )
    sys = classify(sys) if kept else sys
    eliminated = sorted(sub.items(), key=lambda kv: kv[0].sort_key)
    return GaugeFixResult(sys, relations, eliminated, pairings, notes)


# FCC generators ---------------------------------------------------------------------

def fcc_generator(hs: HamiltonianSystem, fcc: Constraint, eps: str = "eps") -> LocalTransformation:
    """``delta z = eps {z, Phi}`` for every phase-space variable."""
    if fcc.klass != "first":
        raise ChainError(f"{fcc.expr} is not first class")
    phi = fcc.first_class_form or fcc.expr
    e = Atom.gauge_function(eps)
    E = Expr.of(e)
    var = {}
    for q, p in hs.pairs:
        var[q] = E * poisson(Expr.of(q), phi, hs.pairs)
        var[p] = E * poisson(Expr.of(p), phi, hs.pairs)
    return LocalTransformation(var, (e,), f"generated by {fcc.expr}")


__all__ = [
    "ChainError",
    "GaugeFixError",
    "ChainReport",
    "ConditionRecord",
    "Classification",
    "GaugeFixResult",
    "total_hamiltonian",
    "stabilize",
    "classify",
    "classify_detail",
    "bracket_matrix",
    "fix_gauge",
    "fcc_generator",
]
