"""Unit conversions between atomic units and the usual lab units.

Everything internal runs in Hartree atomic units; inputs in cm^-1, Debye,
kelvin, V/m or picoseconds are converted on entry.  Factors are CODATA
2018.
"""

CM1_TO_HARTREE = 4.556335e-6
DEBYE_TO_AU = 0.3934303
FIELD_AU_TO_V_PER_M = 5.142207e11
KELVIN_TO_HARTREE = 3.166812e-6      # Boltzmann constant, Eh per K
AU_TIME_TO_S = 2.4188843e-17
AU_TIME_TO_PS = AU_TIME_TO_S * 1e12

_ALIASES = {
    "cm-1": "cm-1", "cm^-1": "cm-1", "1/cm": "cm-1", "wavenumber": "cm-1",
    "hartree": "hartree", "eh": "hartree", "au_energy": "hartree",
    "debye": "debye", "d": "debye",
    "au_dipole": "au_dipole",
    "au_field": "au_field",
    "v/m": "v_per_m", "v_per_m": "v_per_m",
    "kelvin": "kelvin", "k": "kelvin",
    "au_time": "au_time",
    "ps": "ps", "picosecond": "ps",
}

_FACTORS = {
    ("cm-1", "hartree"): CM1_TO_HARTREE,
    ("debye", "au_dipole"): DEBYE_TO_AU,
    ("au_field", "v_per_m"): FIELD_AU_TO_V_PER_M,
    ("kelvin", "hartree"): KELVIN_TO_HARTREE,
    ("au_time", "ps"): AU_TIME_TO_PS,
}


def unit_convert(value, from_unit, to_unit):
    """Convert value between a supported unit pair (either direction)."""
    try:
        src = _ALIASES[from_unit.strip().lower()]
        dst = _ALIASES[to_unit.strip().lower()]
    except KeyError as exc:
        raise ValueError(f"unknown unit {exc.args[0]!r}") from None
    if src == dst:
        return float(value)
    if (src, dst) in _FACTORS:
        return float(value) * _FACTORS[(src, dst)]
    if (dst, src) in _FACTORS:
        return float(value) / _FACTORS[(dst, src)]
    raise ValueError(f"no conversion between {from_unit!r} and {to_unit!r}")
