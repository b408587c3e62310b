from __future__ import annotations

import pytest

from conftest import analyzed, model_file
from dirac_forge.dirac_chain import (
    ChainError,
    GaugeFixError,
    bracket_matrix,
    classify,
    fcc_generator,
    fix_gauge,
    stabilize,
)
from dirac_forge.hamiltonian import total_hamiltonian
from dirac_forge.mechmodel import legendre
from dirac_forge.modelfile import loads
from dirac_forge.symkernel import Expr, Surface, canonical_equal, normalize_constraint, poisson

PAIR = """
[model]
name = pair

[coordinates]
q = dynamical
r = dynamical

[lagrangian]
L = r'^2/2
"""


def _by_expr(hs, text):
    e = hs.model.parse(text)
    for c in hs.constraints:
        if c.expr == e:
            return c
    raise AssertionError(f"{text} not among {[str(c.expr) for c in hs.constraints]}")


def test_total_hamiltonian_examples(toy, spin):
    hs = legendre(toy.model)
    assert total_hamiltonian(hs) == toy.model.parse("p_x^2/2 + p_y^2/2 + y*p_x - z*p_y + lam*p_z")
    hs = legendre(spin.model)
    assert total_hamiltonian(hs) == hs.h0 + spin.model.parse("lam_g*pi_g + lam_phi*pi_phi")


def test_toy_chain():
    hs, rep = analyzed("toy")
    p = hs.model.parse
    assert [(c.stage, c.expr) for c in hs.constraints] == [(1, p("p_z")), (2, p("p_y")), (3, p("p_x"))]
    assert all(c.klass == "first" for c in hs.constraints)
    assert [m.status for m in hs.multipliers] == ["arbitrary"]
    assert rep.termination == "all conditions reduce to zero"
    assert rep.max_stage == 3


def test_dsr_chain():
    hs, _ = analyzed("dsr_coupled")
    p = hs.model.parse
    want = [p("p_g"), p("p[0]*x[0] + p[1]*x[1] + p[2]*x[2] + p[3]*x[3] + p[5]*x[5] + xi"),
            p("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - p[5]^2")]
    assert [c.expr for c in hs.constraints] == want
    assert [c.stage for c in hs.constraints] == [1, 2, 3]
    assert all(c.klass == "first" for c in hs.constraints)


def test_spin_chain_and_classification():
    hs, rep = analyzed("spin")
    pairs = {
        "pi_g": (1, "first"),
        "pi_phi": (1, "second"),
        "pi[1]^2 + pi[2]^2 + pi[3]^2 - b^2/a^2": (2, "first"),
        "v[1]^2 + v[2]^2 + v[3]^2 - a^2": (2, "second"),
        "v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]": (3, "second"),
    }
    for text, (stage, klass) in pairs.items():
        c = _by_expr(hs, text)
        assert (c.stage, c.klass) == (stage, klass), text
    # 2a^2/phi + g b^2/a^2 = 0, normalized
    last = [c for c in hs.constraints if c.stage == 4]
    assert len(last) == 1 and last[0].klass == "second"
    assert canonical_equal(
        last[0].expr, normalize_constraint(hs.model.parse("2*a^2/phi + g*b^2/a^2"), hs.assumptions))
    status = {str(m.name): m.status for m in hs.multipliers}
    assert status == {"lam_g": "arbitrary", "lam_phi": "determined"}


def test_termination_certificate():
    for name in ("toy", "dsr_coupled", "spin", "spin_gauged"):
        hs, _ = analyzed(name)
        surf = Surface(hs.exprs())
        H = total_hamiltonian(hs, substitute=True)
        for c in hs.constraints:
            assert surf.reduce(poisson(c.expr, H, hs.pairs)).is_zero, (name, str(c.expr))


def test_chain_soundness():
    for name in ("toy", "dsr_coupled", "spin"):
        hs, rep = analyzed(name)
        for r in rep.records:
            if r.outcome == "constraint":
                assert canonical_equal(normalize_constraint(r.reduced, hs.assumptions), r.result)


def test_classification_soundness():
    for name in ("toy", "dsr_coupled", "spin"):
        hs, _ = analyzed(name)
        surf = Surface(hs.exprs())
        for c in hs.constraints:
            form = c.first_class_form or c.expr
            brackets = [surf.reduce(poisson(form, d.expr, hs.pairs)) for d in hs.constraints]
            if c.klass == "first":
                assert all(b.is_zero for b in brackets), (name, str(c.expr))
            else:
                assert any(not b.is_zero for b in brackets), (name, str(c.expr))


def test_counting_arbitrary_multipliers_equals_primary_first_class():
    for name in ("toy", "dsr_coupled", "spin", "spin_gauged"):
        hs, _ = analyzed(name)
        arbitrary = sum(m.is_arbitrary for m in hs.multipliers)
        primary_first = sum(c.is_primary and c.klass == "first" for c in hs.constraints)
        assert arbitrary == primary_first, name


def test_bracket_matrix_is_antisymmetric():
    hs, _ = analyzed("spin")
    M = bracket_matrix(hs)
    n = len(M)
    for i in range(n):
        for j in range(n):
            assert M[i][j] == -M[j][i]


def test_stabilize_needs_primary():
    hs = legendre(model_file("free").model)
    with pytest.raises(ChainError):
        stabilize(hs)


def test_dsr_dispersion_relation():
    mf = model_file("dsr_coupled")
    hs, _ = analyzed("dsr_coupled")
    res = fix_gauge(hs, [mf.gauges["ms"]])
    want = mf.model.parse("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - m^2*c^2*(1 + xi*p[0])^2")
    assert any(canonical_equal(r, want) for r in res.relations)
    first_before = sum(c.klass == "first" for c in hs.constraints)
    assert sum(c.klass == "first" for c in res.system.constraints) == first_before - 1


def test_spin_gauge_unit():
    mf = model_file("spin")
    hs, _ = analyzed("spin")
    res = fix_gauge(hs, [mf.gauges["unit"]])
    p = mf.model.parse
    exprs = [c.expr for c in res.system.constraints]
    assert exprs == [p("pi[1]^2 + pi[2]^2 + pi[3]^2 - 3*hbar^2/(4*a^2)"), p("v[1]^2 + v[2]^2 + v[3]^2 - a^2"),
                     p("v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]")]
    klass = [c.klass for c in res.system.constraints]
    assert klass == ["first", "second", "second"]
    assert not any(q.name == "g" for q, _ in res.system.pairs)


def test_full_elimination_leaves_empty_sector():
    mf = loads(PAIR)
    hs = classify(stabilize(legendre(mf.model)).system)
    res = fix_gauge(hs, [mf.model.parse("q")])
    assert res.system.constraints == []
    assert [q.name for q, _ in res.system.pairs] == ["r"]


def test_gauge_commuting_with_everything_rejected():
    hs, _ = analyzed("toy")
    with pytest.raises(GaugeFixError, match="commutes"):
        fix_gauge(hs, [hs.model.parse("p_x + 1")])


def test_ambiguous_gauge_rejected():
    hs, _ = analyzed("toy")
    with pytest.raises(GaugeFixError, match="ambiguous"):
        fix_gauge(hs, [hs.model.parse("x + z")])


def test_fcc_generator_toy():
    hs, _ = analyzed("toy")
    t = fcc_generator(hs, hs.constraints[0])
    eps = Expr.of(t.functions[0])
    for atom, v in t.variations.items():
        assert v == (eps if atom.name == "z" else Expr.of(atom) * 0)


def test_fcc_generator_single_pair_and_dsr():
    mf = loads(PAIR)
    hs = classify(stabilize(legendre(mf.model)).system)
    t = fcc_generator(hs, hs.constraints[0])
    assert t.variations[mf.model.coordinate("q")] == Expr.of(t.functions[0])
    hs, _ = analyzed("dsr_coupled")
    t = fcc_generator(hs, hs.constraints[0])
    assert t.variations[hs.model.coordinate("g")] == Expr.of(t.functions[0])


def test_fcc_generator_rejects_second_class():
    hs, _ = analyzed("spin")
    with pytest.raises(ChainError, match="not first class"):
        fcc_generator(hs, _by_expr(hs, "pi_phi"))
