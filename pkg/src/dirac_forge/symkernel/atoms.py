"""Atoms, atom tables and assumption sets."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping


class AtomKind(enum.Enum):
    COORDINATE = "coordinate"
    DERIVATIVE = "derivative"
    MOMENTUM = "momentum"
    MULTIPLIER = "multiplier"
    PARAMETER = "parameter"
    TIME = "evolution"
    GAUGE_FUNCTION = "gauge-function"


# rank used by the monomial order; lower rank = larger variable
_KIND_RANK = {
    AtomKind.MOMENTUM: 0,
    AtomKind.DERIVATIVE: 1,
    AtomKind.COORDINATE: 2,
    AtomKind.GAUGE_FUNCTION: 3,
    AtomKind.MULTIPLIER: 4,
    AtomKind.TIME: 5,
    AtomKind.PARAMETER: 6,
}

SECTORS = ("dynamical", "gauge", "auxiliary")

_INDEXED = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[(-?\d+)\])?$")


def _name_key(name: str) -> tuple:
    m = _INDEXED.match(name)
    if m is None:
        return (name, -(10**9))
    base, idx = m.groups()
    return (base, -(10**9) if idx is None else int(idx))


@dataclass(frozen=True)
class Atom:
    """A symbol of the expression kernel.

    Identity is ``(kind, name, order)``; the sector tag is metadata only.
    Coordinates of order ``k >= 1`` have kind ``DERIVATIVE``.
    """

    kind: AtomKind
    name: str
    order: int = 0
    sector: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("derivative order must be non-negative")
        if self.order and self.kind not in (AtomKind.DERIVATIVE, AtomKind.GAUGE_FUNCTION):
            raise ValueError(f"{self.kind.value} atoms carry no derivative order")
        if self.kind is AtomKind.DERIVATIVE and self.order == 0:
            raise ValueError("derivative atoms have order >= 1")

    @classmethod
    def coordinate(cls, name: str, sector: str = "dynamical") -> "Atom":
        return cls(AtomKind.COORDINATE, name, 0, sector)

    @classmethod
    def momentum(cls, name: str, sector: str | None = None) -> "Atom":
        return cls(AtomKind.MOMENTUM, name, 0, sector)

    @classmethod
    def parameter(cls, name: str) -> "Atom":
        return cls(AtomKind.PARAMETER, name)

    @classmethod
    def multiplier(cls, name: str) -> "Atom":
        return cls(AtomKind.MULTIPLIER, name)

    @classmethod
    def gauge_function(cls, name: str, order: int = 0) -> "Atom":
        return cls(AtomKind.GAUGE_FUNCTION, name, order)

    @classmethod
    def time(cls, name: str = "tau") -> "Atom":
        return cls(AtomKind.TIME, name)

    @cached_property
    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], _name_key(self.name), self.order)

    @property
    def is_time_dependent(self) -> bool:
        return self.kind in (
            AtomKind.COORDINATE,
            AtomKind.DERIVATIVE,
            AtomKind.GAUGE_FUNCTION,
        )

    @property
    def is_family(self) -> bool:
        """Coordinates, their derivatives and gauge functions form derivative families."""
        return self.is_time_dependent

    @property
    def is_velocity(self) -> bool:
        return self.kind is AtomKind.DERIVATIVE

    @property
    def is_parameter(self) -> bool:
        return self.kind is AtomKind.PARAMETER

    @property
    def family(self) -> tuple[str, str]:
        if self.kind in (AtomKind.COORDINATE, AtomKind.DERIVATIVE):
            return ("coordinate", self.name)
        return (self.kind.value, self.name)

    def base(self) -> "Atom":
        return self.with_order(0)

    def with_order(self, k: int) -> "Atom":
        if self.kind in (AtomKind.COORDINATE, AtomKind.DERIVATIVE):
            kind = AtomKind.COORDINATE if k == 0 else AtomKind.DERIVATIVE
            return Atom(kind, self.name, k, self.sector)
        if self.kind is AtomKind.GAUGE_FUNCTION:
            return Atom(self.kind, self.name, k, self.sector)
        raise ValueError(f"{self.kind.value} atom {self.name} has no derivatives")

    def derivative(self, k: int = 1) -> "Atom":
        return self.with_order(self.order + k)

    @property
    def display(self) -> str:
        return self.name + "'" * self.order

    def __str__(self) -> str:
        return self.display

    def __repr__(self) -> str:
        return f"Atom({self.kind.value}:{self.display})"


class AtomTableError(LookupError):
    pass


class AtomTable:
    """Identifier resolution for the expression grammar.

    Base atoms are declared once; derivative atoms of coordinates and gauge
    functions are resolved on demand from primes (``x'``) or the ``xdot`` /
    ``xddot`` aliases.
    """

    def __init__(self, atoms: Iterable[Atom] = (), time_name: str = "tau"):
        self._atoms: dict[str, Atom] = {}
        self.time = Atom.time(time_name)
        self._atoms[time_name] = self.time
        for a in atoms:
            self.declare(a)

    def declare(self, atom: Atom) -> Atom:
        if atom.order:
            raise AtomTableError("declare base atoms only")
        if not _INDEXED.match(atom.name):
            raise AtomTableError(f"invalid identifier {atom.name!r}")
        old = self._atoms.get(atom.name)
        if old is not None and old != atom:
            raise AtomTableError(
                f"identifier {atom.name!r} already declared as {old.kind.value}"
            )
        self._atoms[atom.name] = atom
        return atom

    def extend(self, atoms: Iterable[Atom]) -> "AtomTable":
        new = AtomTable((), self.time.name)
        new._atoms = dict(self._atoms)
        for a in atoms:
            new.declare(a)
        return new

    def merged(self, other: "AtomTable") -> "AtomTable":
        return self.extend(a for a in other if a.kind is not AtomKind.TIME)

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._atoms.values())

    def __contains__(self, atom: Atom) -> bool:
        base = self._atoms.get(atom.name)
        if base is None:
            return False
        if atom.order == 0:
            return base == atom
        return base.is_family and base.family == atom.family

    def __getitem__(self, name: str) -> Atom:
        return self.lookup(name)

    def get(self, name: str) -> Atom | None:
        return self._atoms.get(name)

    def lookup(self, ident: str, primes: int = 0) -> Atom:
        base = self._atoms.get(ident)
        if base is None:
            for suffix, k in (("ddot", 2), ("dot", 1)):
                if ident.endswith(suffix) and ident[: -len(suffix)] in self._atoms:
                    cand = self._atoms[ident[: -len(suffix)]]
                    if cand.is_family:
                        base, primes = cand, primes + k
                        break
        if base is None:
            raise AtomTableError(f"undeclared identifier {ident!r}")
        if primes:
            if not base.is_family:
                raise AtomTableError(f"{ident!r} is a {base.kind.value}; it has no derivatives")
            return base.with_order(primes)
        return base

    def of_kind(self, *kinds: AtomKind) -> list[Atom]:
        return sorted((a for a in self if a.kind in kinds), key=lambda a: a.sort_key)

    def check(self, atoms: Iterable[Atom]) -> None:
        for a in atoms:
            if a not in self:
                raise AtomTableError(f"atom {a.display!r} is not in this atom table")


@dataclass(frozen=True)
class Flags:
    nonzero: bool = False
    positive: bool = False


class AssumptionSet(Mapping[Atom, Flags]):
    """Sign information about atoms: ``nonzero`` and ``positive`` flags."""

    def __init__(self, flags: Mapping[Atom, Flags] | None = None):
        self._flags = dict(flags or {})

    def __getitem__(self, atom: Atom) -> Flags:
        return self._flags[atom]

    def __iter__(self):
        return iter(self._flags)

    def __len__(self) -> int:
        return len(self._flags)

    def with_flags(self, atom: Atom, *, nonzero: bool = False, positive: bool = False) -> "AssumptionSet":
        old = self._flags.get(atom, Flags())
        new = dict(self._flags)
        new[atom] = Flags(old.nonzero or nonzero or positive, old.positive or positive)
        return AssumptionSet(new)

    def union(self, other: "AssumptionSet") -> "AssumptionSet":
        out = self
        for a, f in other.items():
            out = out.with_flags(a, nonzero=f.nonzero, positive=f.positive)
        return out

    def is_nonzero(self, atom: Atom) -> bool:
        f = self._flags.get(atom)
        return bool(f and (f.nonzero or f.positive))

    def is_positive(self, atom: Atom) -> bool:
        f = self._flags.get(atom)
        return bool(f and f.positive)
