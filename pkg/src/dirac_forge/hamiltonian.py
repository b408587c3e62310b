"""Phase-space system types shared by the Legendre transform and the constraint chain."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .symkernel import ZERO, AssumptionSet, Atom, Expr, Relation


@dataclass(frozen=True)
class Constraint:
    expr: Expr
    stage: int = 1
    klass: str = "undetermined"  # first | second | undetermined
    solved_form: Optional[tuple[Atom, Expr]] = None
    origin: str = "primary"
    first_class_form: Optional[Expr] = None

    def __post_init__(self):
        if self.stage < 1:
            raise ValueError("constraint stage starts at 1")
        if self.klass not in ("first", "second", "undetermined"):
            raise ValueError(f"bad constraint class {self.klass!r}")

    @property
    def is_primary(self) -> bool:
        return self.stage == 1

    def with_class(self, klass: str, first_class_form: Expr | None = None) -> "Constraint":
        return replace(self, klass=klass, first_class_form=first_class_form)


@dataclass(frozen=True)
class MultiplierStatus:
    name: Atom
    constraint: Expr  # the primary constraint it multiplies
    status: str = "arbitrary"  # arbitrary | determined
    value: Optional[Expr] = None

    @property
    def is_arbitrary(self) -> bool:
        return self.status == "arbitrary"


@dataclass
class HamiltonianSystem:
    pairs: list[tuple[Atom, Atom]]
    h0: Expr
    constraints: list[Constraint]
    multipliers: list[MultiplierStatus]
    assumptions: AssumptionSet
    model: object = None
    momenta: dict = field(default_factory=dict)  # momentum atom -> dL/dqdot
    velocities: dict = field(default_factory=dict)  # velocity atom -> phase-space expression
    relations: list[Relation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        prim = [c for c in self.constraints if c.is_primary]
        if len(prim) != len(self.multipliers):
            raise ValueError("exactly one multiplier per primary constraint is required")
        for e in [self.h0] + [c.expr for c in self.constraints]:
            vel = [a.display for a in e.atoms() if a.is_velocity]
            if vel:
                raise ValueError(f"velocity atoms {vel} in a phase-space expression")

    @property
    def coordinates(self) -> list[Atom]:
        return [q for q, _ in self.pairs]

    @property
    def momenta_atoms(self) -> list[Atom]:
        return [p for _, p in self.pairs]

    def exprs(self) -> list[Expr]:
        return [c.expr for c in self.constraints]

    def primaries(self) -> list[Constraint]:
        return [c for c in self.constraints if c.is_primary]

    def first_class(self) -> list[Constraint]:
        return [c for c in self.constraints if c.klass == "first"]

    def second_class(self) -> list[Constraint]:
        return [c for c in self.constraints if c.klass == "second"]

    def determined(self) -> dict[Atom, Expr]:
        return {m.name: m.value for m in self.multipliers if not m.is_arbitrary}

    def arbitrary(self) -> list[Atom]:
        return [m.name for m in self.multipliers if m.is_arbitrary]

    def evolve(self, **changes) -> "HamiltonianSystem":
        return replace(self, **changes)


def total_hamiltonian(hs: HamiltonianSystem, substitute: bool = False) -> Expr:
    """``H = H0 + sum_i lambda_i Phi_i`` over the primary constraints.

    With ``substitute=True`` determined multipliers are replaced by their values.
    """
    prim = hs.primaries()
    if len(prim) != len(hs.multipliers):
        raise ValueError("missing multiplier for a primary constraint")
    h = hs.h0
    for m in hs.multipliers:
        h = h + Expr.of(m.name) * m.constraint
    if substitute:
        det = hs.determined()
        if det:
            h = h.substitute(det)
    return h


__all__ = ["Constraint", "MultiplierStatus", "HamiltonianSystem", "total_hamiltonian", "ZERO"]
