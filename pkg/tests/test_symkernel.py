from __future__ import annotations

from fractions import Fraction

import pytest

from dirac_forge.symkernel import (
    ONE,
    ZERO,
    AssumptionSet,
    Atom,
    AtomTable,
    AtomTableError,
    Expr,
    OutsideFragmentError,
    ParseError,
    PhaseSpaceError,
    Relation,
    Surface,
    ZeroDenominatorError,
    apply_relations,
    canonical_equal,
    d_dtau,
    differentiate,
    euler_operator,
    exact_total_derivative,
    leibniz_expand,
    normalize_constraint,
    parse_expression,
    poisson,
    reduce_mod,
)

TOY = AtomTable(
    [Atom.coordinate(n) for n in "xyz"]
    + [Atom.momentum(f"p_{n}") for n in "xyz"]
    + [Atom.multiplier("lam"), Atom.parameter("m"), Atom.parameter("xi"), Atom.gauge_function("alpha")]
    + [Atom.coordinate("g", "gauge")]
)
PAIRS = [(TOY["x"], TOY["p_x"]), (TOY["y"], TOY["p_y"]), (TOY["z"], TOY["p_z"])]


def P(s: str) -> Expr:
    return parse_expression(s, TOY)


SPIN = AtomTable(
    [Atom.coordinate(f"v[{i}]") for i in (1, 2, 3)]
    + [Atom.momentum(f"pi[{i}]") for i in (1, 2, 3)]
    + [Atom.parameter(n) for n in ("a", "b", "hbar")]
)
SPIN_PAIRS = [(SPIN[f"v[{i}]"], SPIN[f"pi[{i}]"]) for i in (1, 2, 3)]


def S(s: str) -> Expr:
    return parse_expression(s, SPIN)


def spin_surface() -> Surface:
    return Surface([S("v[1]^2 + v[2]^2 + v[3]^2 - a^2"), S("v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]"),
                    S("pi[1]^2 + pi[2]^2 + pi[3]^2 - b^2/a^2")])


def angular_momentum() -> list[Expr]:
    return [S("v[2]*pi[3] - v[3]*pi[2]"), S("v[3]*pi[1] - v[1]*pi[3]"), S("v[1]*pi[2] - v[2]*pi[1]")]


# parser and printer ---------------------------------------------------------

def test_parse_dot_and_prime_spellings_agree():
    assert P("(xdot - y)^2 / 2") == P("(x' - y)^2/2")
    assert str(P("(xdot - y)^2 / 2")) == "1/2*x'^2 - x'*y + 1/2*y^2"


def test_parse_zero_and_constants():
    assert P("0").is_zero
    assert P("0") == ZERO
    assert P("2.5*x") == P("5/2*x")
    assert P("x^-2*y^(-1)") == ONE / (P("x") ** 2 * P("y"))


def test_parse_zero_denominator_is_rejected():
    with pytest.raises(ParseError, match="zero"):
        P("p_z / 0")


def test_parse_syntax_error_reports_position():
    with pytest.raises(ParseError) as err:
        P("x + * y")
    assert "4" in str(err.value) or "column" in str(err.value)


def test_parse_undeclared_identifier():
    with pytest.raises(ParseError, match="q"):
        P("q + x")


def test_printer_round_trip_on_rational_expression():
    e = P("(x^2 + m*x'*y)/(m*x - 3/2*y)^2")
    assert P(str(e)) == e


def test_printer_monomial_denominator_is_per_term():
    assert str(S("pi[1]^2 - b^2/a^2")) == "pi[1]^2 - b^2/a^2"
    assert str(S("3*hbar^2/(4*a^2)")) == "3*hbar^2/(4*a^2)"


def test_canonical_equal_examples():
    assert canonical_equal(P("(x+y)^2"), P("x^2 + 2*x*y + y^2"))
    assert not canonical_equal(P("x' - y"), P("y - x'"))


def test_dsr_lagrangians_differ_by_coupling(toy):
    from conftest import model_file

    l1 = model_file("dsr_plain").model.lagrangian
    cp = model_file("dsr_coupled").model
    assert canonical_equal(cp.lagrangian - l1, cp.parse("-xi*g"))


def test_atom_table_rejects_conflicting_redeclaration():
    with pytest.raises(AtomTableError):
        AtomTable([Atom.coordinate("x"), Atom.parameter("x")])


# calculus --------------------------------------------------------------------

def test_differentiate_velocity_and_coordinate():
    L = P("(x' - y)^2/2")
    assert differentiate(L, TOY.lookup("x", 1)) == P("x' - y")
    # frozen from the sympy oracle (chain rule, checked by central differences)
    assert differentiate(L, TOY["y"]) == P("-x' + y")
    assert differentiate(P("p_x"), Atom.time()).is_zero


def test_d_dtau_examples():
    assert d_dtau(P("alpha*g")) == P("alpha'*g + alpha*g'")
    assert d_dtau(P("m")).is_zero
    # oracle: xi*alpha'*g + xi*alpha*g' - xi*alpha''/2
    assert d_dtau(P("xi*alpha*g - xi*alpha'/2")) == P("xi*alpha'*g + xi*alpha*g' - xi*alpha''/2")


def test_poisson_examples():
    H = P("p_x^2/2 + p_y^2/2 + y*p_x - z*p_y + lam*p_z")
    assert poisson(P("p_z"), H, PAIRS) == P("p_y")
    assert poisson(P("x"), P("p_x"), PAIRS) == ONE


def test_poisson_rejects_velocities():
    with pytest.raises(PhaseSpaceError):
        poisson(P("x'"), P("p_x"), PAIRS)


def test_angular_momentum_algebra():
    J = angular_momentum()
    eps = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}
    for i in range(3):
        for j in range(3):
            want = sum((eps.get((i, j, k), 0) * J[k] for k in range(3)), ZERO)
            assert poisson(J[i], J[j], SPIN_PAIRS) == want


def test_euler_operator_of_total_derivative_vanishes():
    e = d_dtau(P("x*y'^2 + alpha*x"))
    for base in (TOY["x"], TOY["y"], TOY["alpha"]):
        assert euler_operator(e, base).is_zero


def test_leibniz_expand_matches_direct_application():
    # (-D)^2 (c f) expanded as sum_j c_j D^j f
    c, f = P("x*y"), P("z")
    direct = d_dtau(d_dtau(c * f))
    expanded = sum((cj * _dn(f, j) for j, cj in leibniz_expand(c, 2)), ZERO)
    assert expanded == direct


def _dn(e: Expr, k: int) -> Expr:
    for _ in range(k):
        e = d_dtau(e)
    return e


# reduction -------------------------------------------------------------------

def test_reduce_lagrange_identity_on_spin_surface():
    e = S("(v[1]^2 + v[2]^2 + v[3]^2)*(pi[1]^2 + pi[2]^2 + pi[3]^2) - (v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3])^2")
    assert reduce_mod(e, spin_surface()) == S("b^2")


def test_reduce_self():
    assert reduce_mod(P("p_y"), [P("p_y")]).is_zero


def test_reduce_eliminates_the_gauge_momentum():
    t = AtomTable([Atom.momentum(f"p[{i}]") for i in (0, 1, 2, 3, 5)] + [Atom.parameter(n) for n in ("m", "c", "xi")])
    e = parse_expression("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - p[5]^2", t)
    g = parse_expression("p[5] - m*c*(1 + xi*p[0])", t)
    want = parse_expression("p[0]^2 - p[1]^2 - p[2]^2 - p[3]^2 - m^2*c^2*(1 + xi*p[0])^2", t)
    assert reduce_mod(e, [g]) == want


def test_j_squared_on_surface_with_relation():
    J = angular_momentum()
    r = reduce_mod(sum((j * j for j in J), ZERO), spin_surface())
    assert r == S("b^2")
    assert apply_relations(r, [Relation(SPIN["b"], 2, S("3*hbar^2/4"))]) == S("3/4*hbar^2")


def test_normalize_constraint_scales_to_monic_form():
    asm = AssumptionSet().with_flags(SPIN["a"], nonzero=True, positive=True)
    e = normalize_constraint(S("-2*a^2*v[1]*pi[1] - 2*a^2*v[2]*pi[2] - 2*a^2*v[3]*pi[3]"), asm)
    assert e == S("v[1]*pi[1] + v[2]*pi[2] + v[3]*pi[3]")


def test_zero_denominator_in_arithmetic():
    with pytest.raises(ZeroDenominatorError):
        P("x") / ZERO


# exactness -------------------------------------------------------------------

def test_exact_monomial():
    res = exact_total_derivative(P("x'*x"))
    assert res.primitive == P("x^2/2")
    assert res.residuals == {}


def test_non_exact_reports_residual():
    res = exact_total_derivative(P("x"))
    assert res.primitive is None
    assert res.residuals == {"x": ONE}


def test_exact_with_gauge_function_and_parameter():
    F = P("xi*g*alpha - xi*alpha'/2")
    res = exact_total_derivative(d_dtau(F))
    assert res.primitive == F


def test_exact_rejects_phase_space_atoms():
    with pytest.raises(OutsideFragmentError):
        exact_total_derivative(P("p_x*x'"))


def test_exact_rejects_derivative_in_denominator():
    with pytest.raises(OutsideFragmentError):
        exact_total_derivative(P("x/x'"))


def test_exact_rejects_logarithmic_primitive():
    # x'/x = d/dtau log x has no rational primitive
    with pytest.raises(OutsideFragmentError):
        exact_total_derivative(P("x'/x"))


def test_evaluate_is_exact():
    assert P("x^2/3 + m").evaluate({TOY["x"]: Fraction(3), TOY["m"]: Fraction(1, 2)}) == Fraction(7, 2)
