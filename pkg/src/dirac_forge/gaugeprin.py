"""Gauging of globally invariant Lagrangians, local invariance and local-structure equivalence."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .hamiltonian import HamiltonianSystem, total_hamiltonian
from .mechmodel import LocalTransformation, ModelError, ModelSpec
from .symkernel import (
    ONE,
    ZERO,
    Atom,
    AtomKind,
    AtomTableError,
    Expr,
    OutsideFragmentError,
    Surface,
    apply_relations,
    d_dtau,
    exact_total_derivative,
    parse_expression,
    poisson,
)


class GaugeError(ValueError):
    pass


class GlobalInvarianceError(GaugeError):
    def __init__(self, message: str, residual: Expr):
        super().__init__(message)
        self.residual = residual


Matrix = list[list[Expr]]


def _mat(rows) -> Matrix:
    return [[Expr.lift(x) for x in r] for r in rows]


def _mul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n)), ZERO) for j in range(n)] for i in range(n)]


def _commutator(a: Matrix, b: Matrix) -> Matrix:
    ab, ba = _mul(a, b), _mul(b, a)
    return [[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(ab, ba)]


def _is_zero_matrix(a: Matrix) -> bool:
    return all(x.is_zero for r in a for x in r)


def _solve_span(basis: list[list[Expr]], target: list[Expr]) -> list[Expr] | None:
    """Coefficients ``c`` with ``sum_k c_k basis[k] == target`` (flat vectors), or None."""
    m = len(basis)
    rows = [[basis[k][i] for k in range(m)] + [target[i]] for i in range(len(target))]
    piv_of: dict[int, int] = {}
    r = 0
    for col in range(m):
        pr = next((i for i in range(r, len(rows)) if not rows[i][col].is_zero), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        p = rows[r][col]
        rows[r] = [x / p for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][col].is_zero:
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        piv_of[col] = r
        r += 1
    if any(not rows[i][m].is_zero for i in range(r, len(rows))):
        return None
    return [rows[piv_of[k]][m] if k in piv_of else ZERO for k in range(m)]


@dataclass
class LieGroupAction:
    """Matrix realization ``G ~ 1 + xi^i Gamma_i`` of a Lie group on an n-dimensional space.

    ``structure_constants[i][j][k]`` is ``c_ij^k`` with ``[Gamma_i, Gamma_j] = c_ij^k Gamma_k``;
    it is computed from the generators when not given.
    """

    dimension: int
    generators: list[Matrix]
    structure_constants: list | None = None
    parameters: tuple[str, ...] = ()
    name: str = ""
    unitary: bool = False

    def __post_init__(self):
        self.generators = [_mat(g) for g in self.generators]
        for g in self.generators:
            if len(g) != self.dimension or any(len(r) != self.dimension for r in g):
                raise GaugeError(f"generator is not {self.dimension}x{self.dimension}")
        if not self.parameters:
            k = len(self.generators)
            self.parameters = ("xi",) if k == 1 else tuple(f"xi[{i + 1}]" for i in range(k))
        if len(self.parameters) != len(self.generators):
            raise GaugeError("one group parameter per generator is required")
        if self.structure_constants is None:
            c, _ = _structure(self.generators)
            self.structure_constants = c
        elif self.structure_constants is not None:
            self.structure_constants = [[[Fraction(x) for x in row] for row in plane] for plane in self.structure_constants]

    @property
    def size(self) -> int:
        return len(self.generators)

    @property
    def is_trivial(self) -> bool:
        return all(_is_zero_matrix(g) for g in self.generators)

    @classmethod
    def so3(cls, parameter: str = "theta") -> "LieGroupAction":
        # (Gamma_k)_ij = eps_ikj, so Gamma_k v = e_k x v
        gens = []
        for k in range(3):
            gens.append([[Fraction(_levi(i, k, j)) for j in range(3)] for i in range(3)])
        return cls(3, gens, None, tuple(f"{parameter}[{i + 1}]" for i in range(3)), "so3")

    @classmethod
    def unitary_phase(cls, n: int, parameter: str = "gamma") -> "LieGroupAction":
        ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        return cls(n, [ident], None, (parameter,), "u1", unitary=True)

    @classmethod
    def from_spec(cls, spec, dimension: int | None = None) -> "LieGroupAction":
        """Build from a model-file ``[action]`` block (``modelfile.ActionSpec``)."""
        if spec.unitary and not spec.generators:
            if dimension is None:
                raise GaugeError("unitary action needs the target dimension")
            return cls.unitary_phase(dimension, spec.parameters)
        k = len(spec.generators)
        n = len(spec.generators[0])
        params = (spec.parameters,) if k == 1 else tuple(f"{spec.parameters}[{i + 1}]" for i in range(k))
        return cls(n, spec.generators, None, params, spec.name, unitary=spec.unitary)


def _levi(i: int, j: int, k: int) -> int:
    return (i - j) * (j - k) * (k - i) // 2


def _structure(gens: list[Matrix]):
    k = len(gens)
    flat = [[x for r in g for x in r] for g in gens]
    c = [[[Fraction(0)] * k for _ in range(k)] for _ in range(k)]
    bad = []
    for i in range(k):
        for j in range(k):
            comm = _commutator(gens[i], gens[j])
            if _is_zero_matrix(comm):
                continue
            sol = _solve_span(flat, [x for r in comm for x in r])
            if sol is None:
                bad.append((i, j, "not in the span of the generators"))
                continue
            for m, s in enumerate(sol):
                if not s.is_constant:
                    bad.append((i, j, f"coefficient {s} is not a constant"))
                    break
                c[i][j][m] = s.constant_value()
    return (None if bad else c), bad


@dataclass
class ActionValidation:
    ok: bool
    violations: list[str]
    structure_constants: list | None


def validate_action(action: LieGroupAction) -> ActionValidation:
    """Check closure ``[Gamma_i, Gamma_j] = c_ij^k Gamma_k`` and antisymmetry of ``c``."""
    computed, bad = _structure(action.generators)
    out = [f"closure: [Gamma_{i + 1}, Gamma_{j + 1}] {why}" for i, j, why in bad]
    c = action.structure_constants
    k = action.size
    if c is not None:
        for i in range(k):
            for j in range(k):
                for m in range(k):
                    if c[i][j][m] != -c[j][i][m]:
                        out.append(f"antisymmetry: c_{i + 1}{j + 1}^{m + 1} != -c_{j + 1}{i + 1}^{m + 1}")
        if computed is not None and computed != c:
            # declared constants must reproduce every commutator entrywise
            for i in range(k):
                for j in range(k):
                    lhs = _commutator(action.generators[i], action.generators[j])
                    rhs = [[sum((Expr.const(c[i][j][m]) * action.generators[m][a][b] for m in range(k)), ZERO)
                            for b in range(action.dimension)] for a in range(action.dimension)]
                    if any(not (x - y).is_zero for r1, r2 in zip(lhs, rhs) for x, y in zip(r1, r2)):
                        out.append(f"closure: declared c_{i + 1}{j + 1}^k do not reproduce [Gamma_{i + 1}, Gamma_{j + 1}]")
    return ActionValidation(not out, out, computed)


# gauging ---------------------------------------------------------------------------

@dataclass
class GaugingResult:
    model: ModelSpec
    transformation: LocalTransformation | None
    covariant: dict[Atom, Expr]  # target -> Dx before any external-field substitution
    covariance_residuals: dict[Atom, Expr]
    gauge_coordinates: list[Atom]
    notes: list[str] = field(default_factory=list)

    @property
    def covariant_ok(self) -> bool:
        return all(r.is_zero for r in self.covariance_residuals.values())


def _apply(g: Matrix, vec: list[Expr]) -> list[Expr]:
    return [sum((g[a][b] * vec[b] for b in range(len(vec))), ZERO) for a in range(len(vec))]


def _global_residual(model: ModelSpec, action: LieGroupAction, targets: list[Atom]) -> Expr:
    L = model.lagrangian
    x = [Expr.of(q) for q in targets]
    xd = [Expr.of(q.derivative(1)) for q in targets]
    if action.unitary:
        # real realization of a phase: the invariant is quadratic homogeneity
        e = sum((L.diff(q) * xe + L.diff(q.derivative(1)) * ve for q, xe, ve in zip(targets, x, xd)), ZERO)
        return e - L * 2
    for G in action.generators:
        dx, dv = _apply(G, x), _apply(G, xd)
        r = sum((L.diff(q) * a + L.diff(q.derivative(1)) * b for q, a, b in zip(targets, dx, dv)), ZERO)
        if not r.is_zero:
            return r
    return ZERO


def gauge_lagrangian(
    model: ModelSpec,
    action: LieGroupAction,
    target: Sequence[str] | None = None,
    coupling: str = "g",
    external_field: str | None = None,
    field_coefficient: str | Expr | None = None,
    name: str | None = None,
) -> GaugingResult:
    """Replace ``q'^a`` by ``(Dq)^a = q'^a - g^i (Gamma_i)^a_b q^b`` on the target coordinates.

    New gauge coordinates ``g^i`` (one per group parameter) transform as
    ``delta g^k = xi^k' + c_ij^k xi^i g^j``.  With ``external_field`` the gauge
    coordinates are replaced by ``field_coefficient * B^k`` with constant ``B^k``.
    """
    if target:
        targets = [model.coordinate(t) for t in target]
    else:
        targets = model.sector("dynamical")
    if len(targets) != action.dimension:
        raise GaugeError(f"action acts on {action.dimension} coordinates, target has {len(targets)}")
    if action.is_trivial:
        return GaugingResult(model, LocalTransformation({}), {}, {}, [], ["trivial action: model unchanged"])
    res = _global_residual(model, action, targets)
    if not res.is_zero:
        raise GlobalInvarianceError(f"lagrangian is not invariant under the global action: residual {res}", res)
    k = action.size
    names = [coupling] if k == 1 else [f"{coupling}[{i + 1}]" for i in range(k)]
    gcoords = [Atom.coordinate(n, "gauge") for n in names]
    fns = [Atom.gauge_function(p) for p in action.parameters]
    for a in gcoords + fns:
        old = model.table.get(a.name)
        if old is not None and old != a:
            raise GaugeError(f"name {a.name!r} is already declared as {old.kind.value}")
    try:
        table = model.table.extend(a for a in gcoords + fns if model.table.get(a.name) is None)
    except AtomTableError as exc:
        raise GaugeError(str(exc)) from None

    x = [Expr.of(q) for q in targets]
    xd = [Expr.of(q.derivative(1)) for q in targets]
    gx = [_apply(G, x) for G in action.generators]
    D = list(xd)
    for i in range(k):
        D = [d - Expr.of(gcoords[i]) * t for d, t in zip(D, gx[i])]
    covariant = dict(zip(targets, D))

    var: dict[Atom, Expr] = {}
    for a, q in enumerate(targets):
        var[q] = sum((Expr.of(fns[i]) * gx[i][a] for i in range(k)), ZERO)
    c = action.structure_constants or [[[Fraction(0)] * k for _ in range(k)] for _ in range(k)]
    for m in range(k):
        e = Expr.of(fns[m].derivative(1))
        for i in range(k):
            for j in range(k):
                if c[i][j][m]:
                    e = e + Expr.const(c[i][j][m]) * Expr.of(fns[i]) * Expr.of(gcoords[j])
        var[gcoords[m]] = e
    t = LocalTransformation(var, tuple(fns), f"{action.name or 'action'}_local")

    # first-order covariance: delta(Dx) - xi^i Gamma_i Dx
    cov = {}
    for a, q in enumerate(targets):
        rot = sum((Expr.of(fns[i]) * _apply(action.generators[i], D)[a] for i in range(k)), ZERO)
        cov[q] = t.vary(D[a]) - rot

    sub = {q.derivative(1): d for q, d in zip(targets, D)}
    L = model.lagrangian.substitute(sub)
    notes = []
    if action.unitary:
        notes.append("unitary phase realized by a real gauge variable; invariance holds for the complex form only")
    coords = list(model.coordinates) + gcoords
    new_name = name or f"{model.name}_{action.name or 'gauged'}"
    if external_field is None:
        out = replace(model, name=new_name, table=table, coordinates=coords, lagrangian=L)
        return GaugingResult(out, t, covariant, cov, gcoords, notes)

    fields = [Atom.parameter(external_field if k == 1 else f"{external_field}[{i + 1}]") for i in range(k)]
    try:
        table = model.table.extend(f for f in fields if model.table.get(f.name) is None)
    except AtomTableError as exc:
        raise GaugeError(str(exc)) from None
    if field_coefficient is None:
        coef = ONE
    elif isinstance(field_coefficient, Expr):
        coef = field_coefficient
    else:
        coef = parse_expression(field_coefficient, table)
    bad = [a.display for a in coef.atoms() if not a.is_parameter]
    if bad:
        raise GaugeError(f"field coefficient must be built from parameters, found {bad}")
    L = L.substitute({g: coef * Expr.of(f) for g, f in zip(gcoords, fields)})
    notes.append(f"gauge coordinates replaced by ({coef})*{external_field}^k; no residual local symmetry")
    out = replace(model, name=new_name, table=table, lagrangian=L)
    return GaugingResult(out, None, covariant, cov, gcoords, notes)


# local invariance and equivalence ----------------------------------------------------

@dataclass
class EquivalenceWitness:
    """``d F/d tau = delta_2 L_2 - delta_1 L_1`` (``F`` is None when no primitive exists)."""

    F: Expr | None
    m1: ModelSpec
    t1: LocalTransformation
    m2: ModelSpec
    t2: LocalTransformation
    difference: Expr = ZERO
    residuals: dict[str, Expr] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.F is not None

    def certify(self) -> bool:
        return self.F is not None and (d_dtau(self.F) - self.difference).is_zero


def equivalence_test(m1: ModelSpec, t1: LocalTransformation, m2: ModelSpec, t2: LocalTransformation) -> EquivalenceWitness:
    """Like ``local_structure_equiv`` but always returns the witness record with residuals."""
    diff = t2.vary(m2.lagrangian) - t1.vary(m1.lagrangian)
    F, residuals = exact_total_derivative(diff)
    return EquivalenceWitness(F, m1, t1, m2, t2, diff, residuals)


def local_structure_equiv(m1: ModelSpec, t1: LocalTransformation, m2: ModelSpec, t2: LocalTransformation) -> EquivalenceWitness | None:
    """Witness ``F`` with ``delta_2 L_2 = delta_1 L_1 + dF/dtau``, or None."""
    w = equivalence_test(m1, t1, m2, t2)
    return w if w.ok else None


def verify_local_invariance(model: ModelSpec, t: LocalTransformation) -> EquivalenceWitness:
    """``delta L = dF/dtau`` to first order in the gauge functions.

    The comparison is against the zero Lagrangian with the identity transformation,
    so ``difference`` is ``delta L`` itself.
    """
    dL = t.vary(model.lagrangian)
    F, residuals = exact_total_derivative(dL)
    return EquivalenceWitness(F, model, t, model, t, dL, residuals)


# observables ---------------------------------------------------------------------------

@dataclass
class ObservableReport:
    observable: Expr
    variation: Expr
    invariant: bool
    lifted: bool = False
    surface_value: Expr | None = None
    scalar: Expr | None = None
    scalar_value: Expr | None = None


class _Flow:
    """Evaluate configuration-space derivatives along the total-Hamiltonian flow."""

    def __init__(self, hs: HamiltonianSystem):
        self.hs = hs
        self.H = total_hamiltonian(hs, substitute=True)
        self.cache: dict[Atom, Expr] = {}

    def derivative(self, e: Expr) -> Expr:
        mult = [a.display for a in e.atoms() if a.kind is AtomKind.MULTIPLIER]
        if mult:
            raise OutsideFragmentError(f"flow derivative of multipliers {mult} is not available")
        out = poisson(e, self.H, self.hs.pairs)
        tau = [a for a in e.atoms() if a.kind is AtomKind.TIME]
        for a in tau:
            out = out + e.diff(a)
        return out

    def lift_atom(self, a: Atom) -> Expr:
        if a.kind is not AtomKind.DERIVATIVE:
            return Expr.of(a)
        if a not in self.cache:
            self.cache[a] = self.derivative(self.lift_atom(a.with_order(a.order - 1)))
        return self.cache[a]

    def lift(self, e: Expr) -> Expr:
        m = {a: self.lift_atom(a) for a in e.atoms() if a.kind is AtomKind.DERIVATIVE}
        return e.substitute(m) if m else e


def _lifted_variation(o: Expr, t: LocalTransformation, hs: HamiltonianSystem) -> Expr:
    flow = _Flow(hs)
    total = ZERO
    for a in sorted(o.atoms(), key=lambda a: a.sort_key):
        if a.kind is AtomKind.MOMENTUM:
            defn = hs.momenta.get(a)
            if defn is None:
                raise GaugeError(f"no momentum definition for {a.display}")
            d = t.vary(defn)
        elif a.kind is AtomKind.COORDINATE:
            d = t[a]
        elif a.kind is AtomKind.DERIVATIVE:
            d = t.vary(Expr.of(a))
        else:
            continue
        if d.is_zero:
            continue
        total = total + o.diff(a) * flow.lift(d)
    return total


def observable_check(
    o: Expr,
    t: LocalTransformation,
    hs: HamiltonianSystem | None = None,
    scalar: Expr | None = None,
) -> ObservableReport:
    """Variation of ``o`` under ``t`` and (with ``hs``) its value on the constraint surface.

    Phase-space observables under a configuration-space transformation are lifted:
    ``delta p`` is the variation of ``dL/dq'`` with velocities taken along the
    total-Hamiltonian flow.
    """
    has_mom = any(a.kind is AtomKind.MOMENTUM for a in o.atoms())
    moves_mom = any(q.kind is AtomKind.MOMENTUM for q in t.variations)
    lifted = has_mom and not moves_mom
    if lifted:
        if hs is None:
            raise GaugeError("lifting a phase-space observable needs the Hamiltonian system")
        var = _lifted_variation(o, t, hs)
    else:
        var = t.vary(o)
    rep = ObservableReport(o, var, var.is_zero, lifted, scalar=scalar)
    if hs is not None:
        surf = Surface(hs.exprs())
        rep.surface_value = apply_relations(surf.reduce(o), hs.relations)
        if scalar is not None:
            rep.scalar_value = apply_relations(surf.reduce(scalar), hs.relations)
    return rep


__all__ = [
    "GaugeError",
    "GlobalInvarianceError",
    "LieGroupAction",
    "ActionValidation",
    "validate_action",
    "GaugingResult",
    "gauge_lagrangian",
    "EquivalenceWitness",
    "equivalence_test",
    "local_structure_equiv",
    "verify_local_invariance",
    "ObservableReport",
    "observable_check",
    "LocalTransformation",
    "ModelError",
]
