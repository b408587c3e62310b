"""Fixed-step integration of total-Hamiltonian flows with explicit multiplier functions."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .hamiltonian import HamiltonianSystem, total_hamiltonian
from .symkernel import Atom, AtomKind, AtomTable, Expr, parse_expression, poisson

SEED_ENV = "DIRAC_FORGE_SEED"


class NumericsError(ValueError):
    pass


class UnboundMultiplierError(NumericsError):
    pass


class InitialConstraintError(NumericsError):
    def __init__(self, message: str, residuals: dict[str, float]):
        super().__init__(message)
        self.residuals = residuals


class GridMismatchError(NumericsError):
    pass


# code generation -------------------------------------------------------------------

def _float_lit(c: Fraction) -> str:
    return repr(float(c))


def _poly_src(p, names: Mapping[Atom, str]) -> str:
    if not p.terms:
        return "0.0"
    out = []
    for m, c in p.ordered_terms():
        factors = [_float_lit(c)] if c != 1 or not m else []
        for a, k in m:
            v = names[a]
            factors.append(v if k == 1 else f"{v}**{k}")
        out.append("*".join(factors))
    return " + ".join(out)


def _expr_src(e: Expr, names: Mapping[Atom, str]) -> str:
    n = _poly_src(e.num, names)
    if e.den.is_constant():
        return f"({n})/{_float_lit(e.den.constant_value())}" if e.den.constant_value() != 1 else f"({n})"
    return f"({n})/({_poly_src(e.den, names)})"


def _compile(exprs: Sequence[Expr], names: Mapping[Atom, str], state: Sequence[Atom], mults: Sequence[Atom], tau: Atom, label: str):
    """Compile ``f(s, lam, t) -> list[float]`` from the given expressions."""
    lines = [f"def {label}(s, lam, t):"]
    for i, a in enumerate(state):
        lines.append(f"    {names[a]} = s[{i}]")
    for i, a in enumerate(mults):
        lines.append(f"    {names[a]} = lam[{i}]")
    lines.append(f"    {names[tau]} = t")
    lines.append("    return [" + ", ".join(_expr_src(e, names) for e in exprs) + "]")
    src = "\n".join(lines)
    ns: dict = {}
    exec(compile(src, f"<dirac_forge:{label}>", "exec"), ns)
    fn = ns[label]
    fn.source = src
    return fn


def _seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise NumericsError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass
class NumericModel:
    """Compiled right-hand side ``(q', p') = ({q, H_T}, {p, H_T})`` with multiplier slots."""

    hs: HamiltonianSystem
    params: dict[Atom, Fraction]
    state: list[Atom]
    multipliers: list[Atom]  # arbitrary multipliers, in declaration order
    rhs_exprs: list[Expr]
    rhs: Callable
    constraint_exprs: list[Expr]
    constraints: Callable
    hamiltonian: Callable
    tau: Atom
    names: dict[Atom, str] = field(default_factory=dict)

    @property
    def state_names(self) -> list[str]:
        return [a.name for a in self.state]

    @property
    def constraint_names(self) -> list[str]:
        return [str(c.expr) for c in self.hs.constraints]

    def bind(self, e: Expr) -> Expr:
        """Substitute parameter values exactly."""
        return _bind(e, self.params)

    def velocity_map(self) -> dict[Atom, Expr]:
        return {q.derivative(1): self.rhs_exprs[i] for i, q in enumerate(self.state) if q.kind is AtomKind.COORDINATE}

    def evaluator(self, e: Expr, label: str = "observable") -> Callable:
        """Compile an observable; first-order velocities are taken along the flow."""
        e = self.bind(e)
        vel = [a for a in e.atoms() if a.kind is AtomKind.DERIVATIVE]
        if any(a.order > 1 for a in vel):
            raise NumericsError("observables may use at most first derivatives")
        if vel:
            vm = self.velocity_map()
            missing = [a.display for a in vel if a not in vm]
            if missing:
                raise NumericsError(f"no flow velocity for {missing}")
            e = e.substitute({a: vm[a] for a in vel})
        stray = [a.display for a in e.atoms() if a not in self.names]
        if stray:
            raise NumericsError(f"unbound atoms {sorted(stray)} in {label}")
        f = _compile([e], self.names, self.state, self.multipliers, self.tau, "_obs")
        return lambda s, lam, t: f(s, lam, t)[0]

    def self_test(self, points: int = 10, rtol: float = 1e-12, seed: int | None = None) -> float:
        """Compare compiled and exact right-hand sides at random points; returns max relative error."""
        rng = np.random.default_rng(_seed() if seed is None else seed)
        worst = 0.0
        for _ in range(points):
            vals = {a: Fraction(float(rng.uniform(0.5, 1.5))) for a in self.state + self.multipliers}
            vals[self.tau] = Fraction(float(rng.uniform(0.0, 1.0)))
            s = [float(vals[a]) for a in self.state]
            lam = [float(vals[a]) for a in self.multipliers]
            got = self.rhs(s, lam, float(vals[self.tau]))
            for g, e in zip(got, self.rhs_exprs):
                want = float(e.evaluate(vals))
                err = abs(g - want) / max(1.0, abs(want))
                worst = max(worst, err)
                if err > rtol:
                    raise NumericsError(f"compiled evaluator disagrees with {e}: {g} vs {want}")
        return worst


def _bind(e: Expr, params: Mapping[Atom, Fraction]) -> Expr:
    sub = {a: Expr.const(params[a]) for a in e.atoms() if a.is_parameter and a in params}
    return e.substitute(sub) if sub else e


def compile_system(hs: HamiltonianSystem, params: Mapping[str | Atom, object] | None = None, self_test: bool = True) -> NumericModel:
    """Bind parameters and compile the total-Hamiltonian flow of ``hs``."""
    model = hs.model
    bound: dict[Atom, Fraction] = {}
    table = getattr(model, "table", None)
    raw = dict(getattr(model, "values", {}) or {})
    raw.update(params or {})
    for k, v in raw.items():
        a = k if isinstance(k, Atom) else (table.get(k) if table is not None else Atom.parameter(k))
        if a is None or not a.is_parameter:
            raise NumericsError(f"value for unknown parameter {k!r}")
        bound[a] = _frac(v)
    H = total_hamiltonian(hs, substitute=True)
    tau = table.time if table is not None else Atom.time()
    state = [q for q, _ in hs.pairs] + [p for _, p in hs.pairs]
    mults = hs.arbitrary()
    rhs = [poisson(Expr.of(a), H, hs.pairs) for a in state]
    rhs = [_bind(e, bound) for e in rhs]
    cons = [_bind(c.expr, bound) for c in hs.constraints]
    Hb = _bind(H, bound)
    names: dict[Atom, str] = {}
    for i, a in enumerate(state):
        names[a] = f"s{i}"
    for i, a in enumerate(mults):
        names[a] = f"l{i}"
    names[tau] = "t"
    for e in rhs + cons + [Hb]:
        unbound = [a.display for a in e.atoms() if a not in names]
        if unbound:
            kinds = {a.display: a.kind.value for a in e.atoms() if a not in names}
            raise NumericsError(f"unbound symbols {sorted(unbound)} ({kinds}); supply parameter values")
    nm = NumericModel(
        hs, bound, state, mults, rhs,
        _compile(rhs, names, state, mults, tau, "_rhs"), cons,
        _compile(cons, names, state, mults, tau, "_cons"),
        _compile([Hb], names, state, mults, tau, "_ham"), tau, names,
    )
    if self_test:
        nm.self_test()
    return nm


# multiplier functions ---------------------------------------------------------------

def multiplier_function(spec, table: AtomTable | None = None) -> Callable[[float], float]:
    """A multiplier as a tau-function: a callable, a number, or a polynomial string in tau."""
    if callable(spec):
        return spec
    if isinstance(spec, (int, float, Fraction)):
        v = float(spec)
        return lambda t: v
    table = table or AtomTable()
    e = parse_expression(str(spec), table)
    bad = [a.display for a in e.atoms() if a.kind is not AtomKind.TIME]
    if bad:
        raise NumericsError(f"multiplier function may depend on {table.time.name} only, found {bad}")
    f = _compile([e], {table.time: "t"}, [], [], table.time, "_mult")
    return lambda t: f((), (), t)[0]


# trajectories -----------------------------------------------------------------------

@dataclass
class Trajectory:
    grid: np.ndarray
    states: np.ndarray  # (samples, state dimension)
    state_names: list[str]
    multiplier_trace: dict[str, np.ndarray]
    residuals: np.ndarray  # (samples, constraints)
    constraint_names: list[str]
    model: NumericModel | None = None
    step: float = 0.0
    drift_threshold: float = 1e-6
    flags: list[str] = field(default_factory=list)
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = ""

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.state_names.index(name)]

    def at(self, name: str, tau: float) -> float:
        i = int(np.argmin(np.abs(self.grid - tau)))
        return float(self.column(name)[i])

    def lam_at(self, i: int) -> list[float]:
        return [float(v[i]) for v in self.multiplier_trace.values()]

    def evaluate(self, e: Expr | Callable, label: str = "observable") -> np.ndarray:
        f = self.model.evaluator(e, label) if isinstance(e, Expr) else e
        return np.array([f(self.states[i], self.lam_at(i), float(t)) for i, t in enumerate(self.grid)])


def _frac(x) -> Fraction:
    # floats go through their shortest repr so 0.001 stays 1/1000
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def _grid(start, end, step) -> np.ndarray:
    start, end, step = _frac(start), _frac(end), _frac(step)
    if step <= 0 or end <= start:
        raise NumericsError("grid needs end > start and step > 0")
    n = (end - start) / step
    if n.denominator != 1:
        raise NumericsError(f"step {step} does not divide [{start}, {end}]")
    return np.array([float(start + i * step) for i in range(int(n) + 1)])


def _project(nm: NumericModel, s: np.ndarray, lam0: list[float], t0: float) -> np.ndarray:
    # one orthogonal step onto the linearized surface: s - J^T (J J^T)^+ c
    c = np.array(nm.constraints(list(s), lam0, t0))
    J = np.array([[float(e.diff(a).evaluate({b: Fraction(float(x)) for b, x in zip(nm.state, s)} | {nm.tau: Fraction(t0)}))
                   if a in e.atoms() else 0.0 for a in nm.state] for e in nm.constraint_exprs])
    corr = J.T @ np.linalg.lstsq(J @ J.T, c, rcond=None)[0]
    return s - corr


def integrate(
    hs: HamiltonianSystem | NumericModel,
    multipliers: Mapping[str, object],
    init: Mapping[str, object],
    grid: tuple,
    params: Mapping | None = None,
    projection: bool = False,
    strict: bool = True,
    tolerance: float = 1e-10,
    drift_threshold: float = 1e-6,
    name: str = "",
) -> Trajectory:
    """Classical RK4 on the total-Hamiltonian flow with multipliers as explicit tau-functions."""
    nm = hs if isinstance(hs, NumericModel) else compile_system(hs, params)
    table = getattr(nm.hs.model, "table", None)
    fns = []
    for m in nm.multipliers:
        if m.name not in multipliers:
            raise UnboundMultiplierError(f"arbitrary multiplier {m.name} has no function")
        fns.append(multiplier_function(multipliers[m.name], table))
    extra = set(multipliers) - {m.name for m in nm.multipliers}
    determined = {m.name.name for m in nm.hs.multipliers if not m.is_arbitrary}
    if extra - determined:
        raise NumericsError(f"unknown multipliers {sorted(extra - determined)}")

    missing = [n for n in nm.state_names if n not in init]
    if missing:
        raise NumericsError(f"initial state misses {missing}")
    s = np.array([_init_value(init[n], nm, table) for n in nm.state_names], dtype=float)
    t = _grid(*grid)
    h = float(t[1] - t[0])
    lam = lambda tau: [f(tau) for f in fns]  # noqa: E731

    flags = []
    c0 = np.array(nm.constraints(list(s), lam(t[0]), t[0]))
    cnames = nm.constraint_names
    if c0.size and np.max(np.abs(c0)) > tolerance:
        if projection:
            s = _project(nm, s, lam(t[0]), t[0])
            c0 = np.array(nm.constraints(list(s), lam(t[0]), t[0]))
        if c0.size and np.max(np.abs(c0)) > tolerance:
            viol = {n: float(v) for n, v in zip(cnames, c0) if abs(v) > tolerance}
            if strict:
                raise InitialConstraintError(f"initial state violates constraints {viol}", viol)
            flags.append(f"initial state violates constraints: {sorted(viol)}")

    f = nm.rhs
    n = len(t)
    states = np.empty((n, len(s)))
    res = np.empty((n, len(cnames)))
    trace = np.empty((n, len(fns)))
    states[0] = s
    for i in range(n):
        ti = float(t[i])
        li = lam(ti)
        trace[i] = li
        res[i] = nm.constraints(list(states[i]), li, ti) if cnames else []
        if i == n - 1:
            break
        y = states[i]
        lh = lam(ti + h / 2)
        k1 = np.array(f(list(y), li, ti))
        k2 = np.array(f(list(y + h / 2 * k1), lh, ti + h / 2))
        k3 = np.array(f(list(y + h / 2 * k2), lh, ti + h / 2))
        k4 = np.array(f(list(y + h * k3), lam(ti + h), ti + h))
        states[i + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(states[i + 1])):
            flags.append(f"non-finite state at tau = {t[i + 1]}")
            states = states[: i + 2]
            res, trace, t = res[: i + 2], trace[: i + 2], t[: i + 2]
            res[i + 1] = np.nan
            trace[i + 1] = lam(float(t[i + 1]))
            break
    tr = Trajectory(t, states, nm.state_names, {m.name: trace[:, j] for j, m in enumerate(nm.multipliers)},
                    res, cnames, nm, h, drift_threshold, flags, name=name)
    rep = drift(tr)
    if rep.flagged:
        tr.flags.append(f"constraint drift above {drift_threshold:g}: " + ", ".join(rep.violations))
    return tr


def _init_value(v, nm: NumericModel, table: AtomTable | None) -> float:
    if isinstance(v, (int, float, Fraction)):
        return float(v)
    e = parse_expression(str(v), table) if table is not None else None
    if e is None:
        return float(v)
    e = nm.bind(e)
    if not e.is_constant:
        raise NumericsError(f"initial value {v!r} depends on unbound symbols")
    return float(e.constant_value())


# diagnostics ------------------------------------------------------------------------

@dataclass
class DriftReport:
    series: dict[str, np.ndarray]
    max_abs: dict[str, float]
    threshold: float

    @property
    def violations(self) -> list[str]:
        return [k for k, v in self.max_abs.items() if not v <= self.threshold]

    @property
    def flagged(self) -> bool:
        return bool(self.violations)


def drift(tr: Trajectory, hs: HamiltonianSystem | None = None, threshold: float | None = None) -> DriftReport:
    """Per-constraint residual series and max norms along ``tr``."""
    thr = tr.drift_threshold if threshold is None else threshold
    if hs is not None and tr.model is not None and hs is not tr.model.hs:
        nm = compile_system(hs, tr.model.params, self_test=False)
        vals = np.array([nm.constraints(list(tr.states[i]), tr.lam_at(i), float(t)) for i, t in enumerate(tr.grid)])
        names = nm.constraint_names
    else:
        vals, names = tr.residuals, tr.constraint_names
    series = {n: vals[:, j] for j, n in enumerate(names)}
    return DriftReport(series, {n: float(np.max(np.abs(v))) if v.size else 0.0 for n, v in series.items()}, thr)


@dataclass
class OrbitComparison:
    observables: dict[str, float]  # max pairwise deviation
    coordinates: dict[str, float]


def compare_orbits(runs: Sequence[Trajectory], observables: Mapping[str, Expr | Callable] | None = None) -> OrbitComparison:
    """Max pairwise deviation of observables and of raw state components across runs."""
    if not runs:
        raise NumericsError("no runs to compare")
    g0 = runs[0].grid
    for r in runs[1:]:
        if r.grid.shape != g0.shape or not np.array_equal(r.grid, g0):
            raise GridMismatchError("runs do not share a grid")
        if r.state_names != runs[0].state_names:
            raise GridMismatchError("runs do not share a state layout")
    obs = {}
    for name, e in (observables or {}).items():
        vals = [r.evaluate(e, name) for r in runs]
        obs[name] = _pairwise(vals)
    coords = {n: _pairwise([r.column(n) for r in runs]) for n in runs[0].state_names}
    return OrbitComparison(obs, coords)


def _pairwise(vals: list[np.ndarray]) -> float:
    if len(vals) < 2:
        return 0.0
    stack = np.vstack(vals)
    return float(np.max(stack.max(axis=0) - stack.min(axis=0)))


def zero_crossing_frequency(t: np.ndarray, y: np.ndarray) -> float:
    """Angular frequency from a least-squares fit of interpolated zero-crossing times."""
    idx = np.nonzero(np.signbit(y[:-1]) != np.signbit(y[1:]))[0]
    if len(idx) < 2:
        raise NumericsError("fewer than two zero crossings")
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    slope = np.polyfit(np.arange(len(tc)), tc, 1)[0]  # half period
    return float(np.pi / slope)


def to_csv(tr: Trajectory, observables: Mapping[str, Expr | Callable] | None = None) -> str:
    """Header: tau, state components, residuals, observables; values with 17 significant digits."""
    obs = {n: tr.evaluate(e, n) for n, e in (observables or {}).items()}
    obs.update({n: v for n, v in tr.observables.items() if n not in obs})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau"] + tr.state_names + [f"residual({n})" for n in tr.constraint_names] + list(obs))
    for i, t in enumerate(tr.grid):
        row = [t] + list(tr.states[i]) + list(tr.residuals[i]) + [v[i] for v in obs.values()]
        w.writerow(["%.17g" % x for x in row])
    return buf.getvalue()


__all__ = [
    "NumericsError",
    "UnboundMultiplierError",
    "InitialConstraintError",
    "GridMismatchError",
    "NumericModel",
    "compile_system",
    "multiplier_function",
    "Trajectory",
    "integrate",
    "DriftReport",
    "drift",
    "OrbitComparison",
    "compare_orbits",
    "zero_crossing_frequency",
    "to_csv",
]
