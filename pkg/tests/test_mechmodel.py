from __future__ import annotations

import pytest

from conftest import model_file
from dirac_forge.mechmodel import (
    LegendreError,
    ModelError,
    euler_lagrange,
    hessian_rank,
    legendre,
    noether_coefficients,
    noether_identity,
)
from dirac_forge.modelfile import ModelFileError, loads
from dirac_forge.symkernel import AssumptionError, Expr

FREE_1D = """
[model]
name = free1

[coordinates]
x = dynamical

[parameters]
m = positive

[lagrangian]
L = m/2*x'^2
"""


def _one(lagrangian: str, params: str = "m = positive", coords: str = "x = dynamical\ny = dynamical"):
    return loads(f"[model]\nname = t\n\n[coordinates]\n{coords}\n\n[parameters]\n{params}\n\n[lagrangian]\nL = {lagrangian}\n").model


def test_free_particle_equation():
    m = loads(FREE_1D).model
    assert euler_lagrange(m)["x"] == m.parse("-m*x''")


def test_toy_equations_of_motion(toy):
    el = euler_lagrange(toy.model)
    p = toy.model.parse
    assert el["x"] == p("-(x'' - y')")
    # dL/dz - d/dtau dL/dz' with no z' in L; equated to zero gives z + y' = 0
    assert el["z"] == p("z + y'")
    assert el["y"] == p("-(x' - y) - (z' + y'')")


def test_total_derivative_lagrangian_has_no_equations():
    m = _one("x*x' + m*y'*x^2 + 2*m*x*x'*y")
    # x*x' + d/dt(m*x^2*y)
    for _, e in euler_lagrange(m).items():
        assert e.is_zero


def test_toy_legendre(toy):
    hs = legendre(toy.model)
    p = toy.model.parse
    assert [c.expr for c in hs.constraints] == [p("p_z")]
    assert hs.h0 == p("p_x^2/2 + p_y^2/2 + y*p_x - z*p_y")
    assert hs.momenta[toy.model.table["p_x"]] == p("x' - y")


def test_dsr_legendre():
    mf = model_file("dsr_coupled")
    hs = legendre(mf.model)
    p = mf.model.parse
    assert [c.expr for c in hs.constraints] == [p("p_g")]
    want = p("(p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - p[5]^2)/(2*m)"
             " + g*(p[0]*x[0] + p[1]*x[1] + p[2]*x[2] + p[3]*x[3] + p[5]*x[5]) + xi*g")
    assert hs.h0 == want


def test_spin_legendre(spin):
    hs = legendre(spin.model)
    p = spin.model.parse
    assert {str(c.expr) for c in hs.constraints} == {"pi_g", "pi_phi"}
    # frozen from the sympy oracle route
    assert hs.h0 == p("g/2*(pi[1]^2 + pi[2]^2 + pi[3]^2 - b^2/a^2) - (v[1]^2 + v[2]^2 + v[3]^2 - a^2)/phi")


def test_h0_is_phase_space_only():
    for name in ("toy", "dsr_plain", "dsr_coupled", "spin", "spin_gauged", "spin_plain", "free"):
        hs = legendre(model_file(name).model)
        assert not any(a.is_velocity or a.kind.value == "multiplier" for a in hs.h0.atoms())


def test_hessian_rank_matches_primary_count():
    for name in ("toy", "dsr_coupled", "spin", "spin_gauged", "free"):
        m = model_file(name).model
        hs = legendre(m)
        assert len(hs.primaries()) == len(m.coordinates) - hessian_rank(m)


def test_legendre_round_trip_on_regular_sector(spin):
    hs = legendre(spin.model)
    for pm, definition in hs.momenta.items():
        sub = definition.substitute(hs.velocities)
        if not definition.is_zero:
            assert sub == Expr.of(pm)


def test_cubic_lagrangian_rejected():
    with pytest.raises(LegendreError, match="cubic"):
        legendre(_one("x'^3 + y'^2"))


def test_missing_assumption_is_named():
    with pytest.raises(AssumptionError, match="k"):
        legendre(_one("k*x'^2 + y'^2", params="k = none"))


def test_lagrangian_with_higher_derivative_rejected():
    with pytest.raises((ModelError, ModelFileError), match="higher derivative"):
        _one("x''*x")


def test_toy_noether_identity(toy):
    x, y, z = (toy.model.coordinate(n) for n in "xyz")
    one = toy.model.parse("1")
    res = noether_identity(toy.model, {z: [(2, one)], y: [(1, one)], x: [(0, -one)]})
    assert res.ok and res.residual.is_zero


def test_null_operator():
    m = loads(FREE_1D).model
    assert noether_identity(m, {m.coordinate("x"): [(0, m.parse("0"))]}).ok


def test_noether_identity_from_declared_symmetries():
    for name, tname in (("toy", "gauge"), ("spin", "reparam"), ("dsr_coupled", "reparam"), ("spin_plain", "reparam")):
        mf = model_file(name)
        coeffs = noether_coefficients(mf.transformations[tname])
        res = noether_identity(mf.model, coeffs)
        assert res.ok, (name, res.residual)


def test_broken_transformation_gives_nonzero_identity(toy):
    res = noether_identity(toy.model, noether_coefficients(toy.transformations["broken"]))
    assert not res.ok


def test_toy_lagrangian_is_strictly_invariant(toy):
    assert toy.transformations["gauge"].vary(toy.model.lagrangian).is_zero
