"""Acceptance criteria 1-11, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line (printed in the terminal summary) before asserting.
"""
from __future__ import annotations

import math
import time

import numpy as np
from hypothesis import settings

import conftest
from dirac_forge.cli import build_parser, run_pipeline
from dirac_forge.dirac_chain import classify, fix_gauge, stabilize
from dirac_forge.gaugeprin import LieGroupAction, gauge_lagrangian, local_structure_equiv, observable_check
from dirac_forge.mechmodel import legendre, noether_identity
from dirac_forge.modelfile import bundled, load
from dirac_forge.numlab import compare_orbits, compile_system, integrate, zero_crossing_frequency
from dirac_forge.symkernel import ZERO, Surface, apply_relations, canonical_equal, d_dtau, poisson, reduce_mod


def record(n: int, checks: list[tuple[str, bool]]) -> None:
    ok = all(c for _, c in checks)
    failed = [label for label, c in checks if not c]
    detail = "all checks hold" if ok else "failed: " + "; ".join(failed)
    conftest.ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def _analyze(name):
    args = build_parser().parse_args(["analyze", name])
    return run_pipeline(args)


def _system(name):
    mf = load(bundled(name))
    return mf, classify(stabilize(legendre(mf.model)).system)


def _by(hs, text):
    e = hs.model.parse(text)
    return [c for c in hs.constraints if canonical_equal(c.expr, e)]


TOY_INIT = {"x": 0, "y": 1, "z": 1, "p_x": 0, "p_y": 0, "p_z": 0}
TOY_CLOSED = {
    "phi_zero": (lambda t: t - t**2 / 2, lambda t: 1 - t, lambda t: 1 + 0 * t),
    "phi_linear": (lambda t: t - t**2 / 2 - t**3 / 6, lambda t: 1 - t - t**2 / 2, lambda t: 1 + t),
    "phi_quadratic": (lambda t: t - t**2 / 2 + t**3 / 6 - t**4 / 12, lambda t: 1 - t + t**2 / 2 - t**3 / 3,
                      lambda t: 1 - t + t**2),
}


def _toy_err(tr, forms):
    return max(float(np.max(np.abs(tr.column(n) - f(tr.grid)))) for n, f in zip("xyz", forms))


def test_criterion_01_toy_chain():
    t0 = time.perf_counter()
    code, rep = _analyze("toy")
    mf, hs = _system("toy")
    elapsed = time.perf_counter() - t0
    p = mf.model.parse
    got = [(c.stage, c.expr) for c in hs.constraints]
    want = [(1, p("p_z")), (2, p("p_y")), (3, p("p_x"))]
    record(1, [
        ("exit code 0", code == 0),
        ("constraints p_z, p_y, p_x at stages 1-3",
         len(got) == 3 and all(s == ws and canonical_equal(e, we) for (s, e), (ws, we) in zip(got, want))),
        ("all first class", all(c.klass == "first" for c in hs.constraints)),
        ("report agrees", [c["class"] for c in rep["constraints"]] == ["first"] * 3),
        ("lambda arbitrary", [m.status for m in hs.multipliers] == ["arbitrary"]),
        ("chain terminates at stage 3", max(c.stage for c in hs.constraints) == 3),
        (f"< 1 s (took {elapsed:.2f} s)", elapsed < 1.0),
    ])


def test_criterion_02_noether_identity():
    t0 = time.perf_counter()
    mf = load(bundled("toy"))
    x, y, z = (mf.model.coordinate(n) for n in "xyz")
    one = mf.model.parse("1")
    res = noether_identity(mf.model, {z: [(2, one)], y: [(1, one)], x: [(0, -one)]})
    elapsed = time.perf_counter() - t0
    record(2, [
        ("operator annihilates the variational derivatives", res.ok and res.residual == ZERO),
        (f"< 1 s (took {elapsed:.2f} s)", elapsed < 1.0),
    ])


def test_criterion_03_trajectory_vs_closed_form():
    t0 = time.perf_counter()
    mf, hs = _system("toy")
    nm = compile_system(hs)
    errs = {}
    for name, sim in mf.simulations.items():
        tr = integrate(nm, sim.multipliers, sim.init, sim.grid, name=name)
        errs[name] = _toy_err(tr, TOY_CLOSED[name])
    coarse = _toy_err(integrate(nm, {"lam": 1}, TOY_INIT, (0, 1, 0.001)), TOY_CLOSED["phi_linear"])
    fine = _toy_err(integrate(nm, {"lam": 1}, TOY_INIT, (0, 1, 0.0005)), TOY_CLOSED["phi_linear"])
    ratio = coarse / fine if fine > 0 else math.inf
    elapsed = time.perf_counter() - t0
    record(3, [
        ("closed forms within 1e-6 (max err %.2e)" % max(errs.values()), max(errs.values()) < 1e-6),
        # RK4 is exact on the cubic phi = tau solution, so both errors sit at round-off
        ("step halving ratio in [12, 20] (got %.3g from %.2e / %.2e)" % (ratio, coarse, fine), 12 <= ratio <= 20),
        (f"< 5 s (took {elapsed:.2f} s)", elapsed < 5.0),
    ])


def test_criterion_04_gauge_orbit_invariance():
    t0 = time.perf_counter()
    mf, hs = _system("toy")
    nm = compile_system(hs)
    runs = [integrate(nm, s.multipliers, s.init, s.grid, name=n) for n, s in mf.simulations.items()]
    obs = {"Ex": mf.model.parse("x' - y"), "Ez": mf.model.parse("z + y'")}
    c = compare_orbits(runs, obs)
    elapsed = time.perf_counter() - t0
    record(4, [
        ("x'-y and z+y' agree within 1e-6 (%.2e, %.2e)" % (c.observables["Ex"], c.observables["Ez"]),
         max(c.observables.values()) < 1e-6),
        ("z differs by more than 0.1 (%.3g)" % c.coordinates["z"], c.coordinates["z"] > 0.1),
        (f"< 5 s (took {elapsed:.2f} s)", elapsed < 5.0),
    ])


def test_criterion_05_dsr_pipeline():
    t0 = time.perf_counter()
    mf, hs = _system("dsr_coupled")
    p = mf.model.parse
    chain = [c.expr for c in hs.constraints]
    want = [p("p_g"), p("p[0]*x[0] + p[1]*x[1] + p[2]*x[2] + p[3]*x[3] + p[5]*x[5] + xi"),
            p("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - p[5]^2")]
    fixed = fix_gauge(hs, [mf.gauges["ms"]])
    rel = p("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - m^2*c^2*(1 + xi*p[0])^2")
    elapsed = time.perf_counter() - t0
    record(5, [
        ("chain p_g -> p.x + xi -> p.p", len(chain) == 3 and all(canonical_equal(a, b) for a, b in zip(chain, want))),
        ("stages 1, 2, 3", [c.stage for c in hs.constraints] == [1, 2, 3]),
        ("all first class", all(c.klass == "first" for c in hs.constraints)),
        ("dispersion relation", any(canonical_equal(r, rel) for r in fixed.relations)),
        (f"< 2 s (took {elapsed:.2f} s)", elapsed < 2.0),
    ])


def test_criterion_06_spin_surface():
    t0 = time.perf_counter()
    mf, hs = _system("spin")
    p = mf.model.parse

    def klass(text):
        found = _by(hs, text)
        return (found[0].stage, found[0].klass) if len(found) == 1 else None

    last = [c for c in hs.constraints if c.stage == 4]
    cond4 = p("2*a^2/phi + g*b^2/a^2")
    cond4_ok = len(last) == 1 and reduce_mod(cond4, Surface([last[0].expr])).is_zero and last[0].klass == "second"
    fixed = fix_gauge(hs, [mf.gauges["unit"]])
    after = [c.expr for c in fixed.system.constraints]
    want_after = [p("pi[1]^2 + pi[2]^2 + pi[3]^2 - 3*hbar^2/(4*a^2)"), p("v[1]^2 + v[2]^2 + v[3]^2 - a^2"),
                  p("v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]")]
    elapsed = time.perf_counter() - t0
    record(6, [
        ("pi_g, pi_phi primary", klass("pi_g") == (1, "first") and klass("pi_phi") == (1, "second")),
        ("pi^2 = b^2/a^2 first class", klass("pi[1]^2 + pi[2]^2 + pi[3]^2 - b^2/a^2") == (2, "first")),
        ("v^2 = a^2 second class", klass("v[1]^2 + v[2]^2 + v[3]^2 - a^2") == (2, "second")),
        ("v.pi = 0 second class", klass("v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]") == (3, "second")),
        ("2a^2/phi + g b^2/a^2 = 0 second class", cond4_ok),
        ("g = 1 surface with b^2 = 3 hbar^2/4", after == want_after),
        (f"< 2 s (took {elapsed:.2f} s)", elapsed < 2.0),
    ])


def test_criterion_07_observable_algebra():
    mf, hs = _system("spin")
    p = mf.model.parse
    J = [p("v[2]*pi[3] - v[3]*pi[2]"), p("v[3]*pi[1] - v[1]*pi[3]"), p("v[1]*pi[2] - v[2]*pi[1]")]
    pairs = [(mf.model.coordinate(f"v[{i}]"), mf.model.momentum(mf.model.coordinate(f"v[{i}]"))) for i in (1, 2, 3)]

    def eps(i, j, k):
        return (i - j) * (j - k) * (k - i) // 2

    algebra = all(
        poisson(J[i], J[j], pairs) == sum((eps(i, j, k) * J[k] for k in range(3)), ZERO)
        for i in range(3) for j in range(3)
    )
    Jsq = J[0] * J[0] + J[1] * J[1] + J[2] * J[2]
    t = mf.transformations["reparam"]
    reports = [observable_check(j, t, hs, Jsq) for j in J]
    fixed = fix_gauge(hs, [mf.gauges["unit"]]).system
    direct = reduce_mod(Jsq, Surface(fixed.exprs()))
    generic = apply_relations(reduce_mod(Jsq, Surface(hs.exprs())), mf.model.relations)
    record(7, [
        ("{J_i, J_j} = eps_ijk J_k for 9 pairs", algebra),
        ("delta J_i = 0", all(r.invariant and r.variation.is_zero for r in reports)),
        ("J^2 = 3 hbar^2/4 on the gauge-fixed surface", direct == p("3*hbar^2/4")),
        ("J^2 = b^2 = 3 hbar^2/4 on the full surface", generic == p("3*hbar^2/4")),
    ])


def test_criterion_08_gauging_certificates():
    free = load(bundled("free"))
    u1 = gauge_lagrangian(free.model, LieGroupAction.from_spec(free.actions["u1"], 5))
    spin = load(bundled("spin"))
    spec = spin.actions["so3_field"]
    so3 = gauge_lagrangian(spin.model, LieGroupAction.from_spec(spec), spec.target, spec.coupling,
                           spec.external_field, spec.field_coefficient)
    record(8, [
        ("U(1) gauged Lagrangian", canonical_equal(u1.model.lagrangian, load(bundled("dsr_plain")).model.lagrangian)),
        ("L'_spin", canonical_equal(so3.model.lagrangian, load(bundled("spin_gauged")).model.lagrangian)),
        ("covariance residuals vanish (U(1))", u1.covariant_ok),
        ("covariance residuals vanish (SO(3) field)", so3.covariant_ok),
    ])


def test_criterion_09_local_structure_equivalences():
    plain, coupled = load(bundled("dsr_plain")), load(bundled("dsr_coupled"))
    w1 = local_structure_equiv(plain.model, plain.transformations["reparam"],
                               coupled.model, coupled.transformations["reparam"])
    sp_, s = load(bundled("spin_plain")), load(bundled("spin"))
    w2 = local_structure_equiv(sp_.model, sp_.transformations["reparam"], s.model, s.transformations["reparam"])
    closed = s.model.parse("alpha*g*b^2/(2*a^2) + alpha/phi*(v[1]^2 + v[2]^2 + v[3]^2 - a^2)")
    record(9, [
        ("dsr pair witness found", w1 is not None),
        ("dsr pair d_dtau(F) = delta2 L2 - delta1 L1", w1 is not None and canonical_equal(d_dtau(w1.F), w1.difference)),
        ("spin pair witness found", w2 is not None),
        ("spin pair d_dtau(F) = delta2 L2 - delta1 L1", w2 is not None and canonical_equal(d_dtau(w2.F), w2.difference)),
        ("spin pair F equals the closed-form primitive", w2 is not None and canonical_equal(w2.F, closed)),
    ])


def test_criterion_10_precession():
    t0 = time.perf_counter()
    mf, hs = _system("spin_gauged")
    sim = mf.simulations["precession"]
    tr = integrate(compile_system(hs), sim.multipliers, sim.init, sim.grid, name="precession")
    J1 = tr.evaluate(mf.model.parse(sim.observables["J1"]))
    Jsq = tr.evaluate(mf.model.parse(sim.observables["Jsq"]))
    elapsed = time.perf_counter() - t0
    vals = mf.model.values
    omega = float(vals["e"] * vals["B[3]"] / vals["m"])
    periods = (tr.grid[-1] - tr.grid[0]) * omega / (2 * math.pi)
    w = zero_crossing_frequency(tr.grid, J1)
    rel = abs(w - omega) / omega
    norm_drift = float(np.max(np.abs(np.sqrt(Jsq) - math.sqrt(Jsq[0]))))
    record(10, [
        ("at least 10 periods (%.2f)" % periods, periods >= 10),
        ("frequency within 1e-4 relative (%.2e)" % rel, rel < 1e-4),
        ("| |J| - |J(0)| | < 1e-8 (%.2e)" % norm_drift, norm_drift < 1e-8),
        (f"< 5 s (took {elapsed:.2f} s)", elapsed < 5.0),
    ])


def test_criterion_11_property_suites():
    import test_properties as props

    suites = [
        props.test_bracket_antisymmetry,
        props.test_bracket_jacobi,
        props.test_leibniz,
        props.test_exactness_round_trip,
        props.test_exactness_round_trip_with_parameter_denominator,
        props.test_reduce_mod_idempotent,
    ]
    checks = []
    for fn in suites:
        try:
            fn()
            checks.append((fn.__name__, True))
        except Exception as exc:  # noqa: BLE001 - any failure is a FAIL line
            checks.append((f"{fn.__name__}: {exc}", False))
    active = settings.default
    checks.append(("200 cases each, fixed seed", active.max_examples == 200 and active.derandomize))
    record(11, checks)
