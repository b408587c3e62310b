from __future__ import annotations

from fractions import Fraction

import pytest

from dirac_forge.mechmodel import legendre
from dirac_forge.modelfile import ModelFileError, bundled, dumps, expand_key, load, loads, parse_number
from dirac_forge.symkernel import canonical_equal

FIXTURES = ("toy", "dsr_plain", "dsr_coupled", "spin", "spin_plain", "spin_gauged", "free")


@pytest.mark.parametrize("name", FIXTURES)
def test_bundled_fixtures_load(name):
    mf = load(bundled(name))
    assert mf.model.name == name
    assert mf.model.lagrangian is not None


@pytest.mark.parametrize("name", FIXTURES)
def test_dumps_round_trip(name):
    mf = load(bundled(name))
    back = loads(dumps(mf.model, mf.functions))
    assert back.model.name == mf.model.name
    assert [(q.name, q.sector) for q in back.model.coordinates] == [(q.name, q.sector) for q in mf.model.coordinates]
    assert canonical_equal(back.model.parse(str(mf.model.lagrangian)), back.model.lagrangian)
    assert str(back.model.lagrangian) == str(mf.model.lagrangian)
    assert str(legendre(back.model).h0) == str(legendre(mf.model).h0)


def test_expand_key_ranges():
    assert expand_key("x[0..3]") == [("x[0]", 0), ("x[1]", 1), ("x[2]", 2), ("x[3]", 3)]
    assert expand_key("g") == [("g", None)]


def test_parse_number_is_exact():
    assert parse_number("0.1") == Fraction(1, 10)
    assert parse_number("-3/4") == Fraction(-3, 4)


def test_spin_relation_and_values():
    mf = load(bundled("spin_gauged"))
    assert [str(r) for r in mf.model.relations] == ["b^2 = 3/4*hbar^2"]
    assert mf.model.values["B[3]"] == 1
    assert mf.simulations["precession"].grid == (0, 63, Fraction(1, 200))


def test_error_carries_line_number():
    text = "[model]\nname = bad\n\n[coordinates]\nx = dynamical\n\n[lagrangian]\nL = x'^2 + q\n"
    with pytest.raises(ModelFileError, match=r":8:"):
        loads(text)


def test_unknown_sector_rejected():
    text = "[model]\nname = bad\n\n[coordinates]\nx = sideways\n\n[lagrangian]\nL = x'^2\n"
    with pytest.raises(ModelFileError, match="sideways"):
        loads(text)


def test_missing_lagrangian_rejected():
    with pytest.raises(ModelFileError, match="lagrangian"):
        loads("[model]\nname = bad\n\n[coordinates]\nx = dynamical\n")


def test_missing_file():
    with pytest.raises(ModelFileError, match="cannot read"):
        load("/nonexistent/none.model")


def test_transformation_parsed_with_gauge_function():
    mf = load(bundled("toy"))
    t = mf.transformations["gauge"]
    assert [a.name for a in t.functions] == ["alpha"]
    assert t.max_order == 2
