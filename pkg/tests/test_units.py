import math

import pytest

from rotorshape.units import FIELD_AU_TO_V_PER_M, unit_convert


def test_cm1_to_hartree():
    assert unit_convert(0.2059, "cm-1", "hartree") == \
        pytest.approx(9.3815e-7, rel=1e-4)


def test_field_unit_definition():
    assert unit_convert(1.0, "au_field", "V/m") == FIELD_AU_TO_V_PER_M


def test_round_trips():
    pairs = [("cm-1", "hartree"), ("debye", "au_dipole"),
             ("au_field", "V/m"), ("kelvin", "hartree"), ("au_time", "ps")]
    for a, b in pairs:
        x = 0.8137
        back = unit_convert(unit_convert(x, a, b), b, a)
        assert math.isclose(back, x, rel_tol=1e-14)


def test_aliases_and_identity():
    assert unit_convert(2.0, "cm^-1", "1/cm") == 2.0
    assert unit_convert(1.0, "D", "au_dipole") == \
        unit_convert(1.0, "debye", "au_dipole")


def test_unknown_unit_pair():
    with pytest.raises(ValueError):
        unit_convert(1.0, "parsec", "hartree")
    with pytest.raises(ValueError):
        unit_convert(1.0, "debye", "kelvin")
