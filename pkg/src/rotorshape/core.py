"""Rigid-rotor model: molecule data, |j,m> basis, coupling matrix,
expectation values and thermal ensembles.

A channel is the m-conserving subspace spanned by |j,m>, j = |m|..j_max;
the cos-theta operator restricted to a channel is symmetric tridiagonal
with zero diagonal, so its eigendecomposition (cached per basis) gives
exact coupling propagators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .units import CM1_TO_HARTREE, DEBYE_TO_AU, KELVIN_TO_HARTREE

NORM_TOL = 1e-10


@dataclass(frozen=True)
class Molecule:
    """Linear polar molecule; B and mu0 in atomic units."""

    name: str
    b: float
    mu0: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("rotational constant must be positive")
        if self.mu0 <= 0:
            raise ValueError("dipole moment must be positive")

    @property
    def tr(self) -> float:
        """Rotational (full revival) period, atomic units of time."""
        return math.pi / self.b

    @property
    def fr(self) -> float:
        return self.b / math.pi

    @classmethod
    def from_spectroscopic(cls, name, b_cm1, mu0_debye):
        return cls(name, b_cm1 * CM1_TO_HARTREE, mu0_debye * DEBYE_TO_AU)


_PRESETS = {
    "OCS": (0.2059, 0.712),
    "CO": (1.92253, 0.112),
}


def molecule(name: str) -> Molecule:
    """Look up a built-in molecule preset by name."""
    key = name.strip().upper()
    if key not in _PRESETS:
        raise KeyError(f"no molecule preset {name!r} "
                       f"(available: {', '.join(sorted(_PRESETS))})")
    b_cm1, mu0_d = _PRESETS[key]
    return Molecule.from_spectroscopic(key, b_cm1, mu0_d)


def molecule_from_config(source) -> Molecule:
    """Build a molecule from a mapping or a JSON file with keys
    {name, B_cm1, mu0_debye}."""
    if isinstance(source, (str, Path)):
        source = json.loads(Path(source).read_text())
    unknown = set(source) - {"name", "B_cm1", "mu0_debye"}
    if unknown:
        raise ValueError(f"unknown molecule keys: {sorted(unknown)}")
    return Molecule.from_spectroscopic(
        source["name"], float(source["B_cm1"]), float(source["mu0_debye"]))


@dataclass(frozen=True)
class BasisSpec:
    """Truncated |j,m> channel basis: j runs from |m| to j_max."""

    j_max: int
    m: int = 0

    def __post_init__(self):
        if self.j_max < 1:
            raise ValueError("j_max must be >= 1")
        if abs(self.m) > self.j_max:
            raise ValueError("|m| must not exceed j_max")

    @property
    def dim(self) -> int:
        return self.j_max - abs(self.m) + 1

    def j_values(self) -> np.ndarray:
        return np.arange(abs(self.m), self.j_max + 1)


@dataclass
class RotorState:
    """Wave packet over one m-channel; amplitudes indexed by j - |m|."""

    basis: BasisSpec
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (self.basis.dim,):
            raise ValueError("amplitude length does not match basis")
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |C|^2 = {self.norm()!r}")

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def copy(self) -> "RotorState":
        return RotorState(self.basis, self.amps.copy())

    @classmethod
    def basis_state(cls, basis: BasisSpec, j0: int) -> "RotorState":
        amps = np.zeros(basis.dim, dtype=np.complex128)
        amps[j0 - abs(basis.m)] = 1.0
        return cls(basis, amps)

    @classmethod
    def ground(cls, j_max: int) -> "RotorState":
        return cls.basis_state(BasisSpec(j_max, 0), 0)


def coupling_offdiag(basis: BasisSpec) -> np.ndarray:
    """Off-diagonal elements <j+1,m|cos theta|j,m> for the channel."""
    m = abs(basis.m)
    j = np.arange(m, basis.j_max, dtype=float)
    return np.sqrt((j + 1 - m) * (j + 1 + m)) / np.sqrt(
        (2 * j + 1) * (2 * j + 3))


@dataclass(frozen=True)
class CouplingMatrix:
    """cos-theta operator on a channel: symmetric tridiagonal, zero
    diagonal, with a lazily cached eigendecomposition."""

    basis: BasisSpec
    offdiag: np.ndarray = field(repr=False)

    def dense(self) -> np.ndarray:
        mat = np.zeros((self.basis.dim, self.basis.dim))
        idx = np.arange(self.basis.dim - 1)
        mat[idx, idx + 1] = self.offdiag
        mat[idx + 1, idx] = self.offdiag
        return mat

    def eig(self):
        """(eigenvalues, orthonormal eigenvectors), computed once."""
        cached = getattr(self, "_eig", None)
        if cached is None:
            vals, vecs = eigh_tridiagonal(
                np.zeros(self.basis.dim), np.asarray(self.offdiag))
            vecs = np.ascontiguousarray(vecs)
            vals.setflags(write=False)
            vecs.setflags(write=False)
            cached = (vals, vecs)
            object.__setattr__(self, "_eig", cached)
        return cached

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros_like(vec, dtype=np.complex128)
        out[:-1] += self.offdiag * vec[1:]
        out[1:] += self.offdiag * vec[:-1]
        return out


@lru_cache(maxsize=128)
def make_coupling(basis: BasisSpec) -> CouplingMatrix:
    off = coupling_offdiag(basis)
    off.setflags(write=False)
    return CouplingMatrix(basis, off)


def expectation_cos(state: RotorState) -> float:
    """<cos theta> = 2 Re sum_j alpha_j C_j conj(C_{j+1})."""
    alpha = make_coupling(state.basis).offdiag
    c = state.amps
    return float(2.0 * np.sum(alpha * (c[:-1] * np.conj(c[1:])).real))


def expectation_cos_power(state: RotorState, p: int) -> float:
    """<(cos theta)^p> for odd p <= 5, within the truncated channel."""
    if p not in (1, 3, 5):
        raise ValueError("p must be an odd integer in {1, 3, 5}")
    coupling = make_coupling(state.basis)
    vec = state.amps
    for _ in range(p):
        vec = coupling.apply(vec)
    return float(np.vdot(state.amps, vec).real)


@dataclass(frozen=True)
class Channel:
    j0: int
    m0: int
    weight: float
    state: RotorState


@dataclass(frozen=True)
class ThermalEnsemble:
    """Boltzmann-weighted (j0, m0) channels evolving independently."""

    molecule: Molecule
    temperature: float
    j_max: int
    channels: tuple

    def weights_sum(self) -> float:
        return float(sum(ch.weight for ch in self.channels))

    def replace_states(self, states) -> "ThermalEnsemble":
        chans = tuple(Channel(ch.j0, ch.m0, ch.weight, st)
                      for ch, st in zip(self.channels, states))
        return ThermalEnsemble(self.molecule, self.temperature,
                               self.j_max, chans)


def _level_factors(mol: Molecule, temp_k: float, j_hi: int) -> np.ndarray:
    j = np.arange(j_hi + 1, dtype=float)
    return np.exp(-mol.b * j * (j + 1) / (temp_k * KELVIN_TO_HARTREE))


def default_target_harmonics(mol: Molecule, temp_k: float) -> int:
    """Harmonics the orientation signal can physically carry:
    max(9, first j with thermal level population below 1e-4)."""
    if temp_k <= 0:
        return 9
    f = _level_factors(mol, temp_k, 2000)
    pop = (2 * np.arange(2001) + 1) * f
    pop /= pop.sum()
    below = np.nonzero(pop < 1e-4)[0]
    first = int(below[0]) if below.size else 2000
    return max(9, first)


def default_j_max(mol: Molecule, temp_k: float) -> int:
    """Basis truncation: the populated extent plus 6 levels of headroom
    for field-driven ladder climbing."""
    return default_target_harmonics(mol, temp_k) + 6


def boltzmann_channels(mol: Molecule, temp_k: float, j_max: int | None = None,
                       cutoff: float = 0.999) -> ThermalEnsemble:
    """Populate (j0, m0) channels from the Boltzmann distribution.

    The partition function includes the (2j0+1) m-degeneracy so that all
    channel weights sum to one; levels are included in increasing j0
    until the cumulative population reaches `cutoff`, then the retained
    weights are renormalized.  Raises if j_max cannot cover the cutoff.
    """
    if temp_k < 0:
        raise ValueError("temperature must be >= 0")
    if not 0 < cutoff <= 1:
        raise ValueError("cutoff must lie in (0, 1]")
    if j_max is None:
        j_max = default_j_max(mol, temp_k)

    if temp_k == 0:
        basis = BasisSpec(j_max, 0)
        chan = Channel(0, 0, 1.0, RotorState.basis_state(basis, 0))
        return ThermalEnsemble(mol, 0.0, j_max, (chan,))

    # converged partition function (j well past any practical truncation)
    j_hi = max(j_max, 400)
    f = _level_factors(mol, temp_k, j_hi)
    degeneracy = 2 * np.arange(j_hi + 1) + 1
    z = float(np.sum(degeneracy * f))
    level_pop = degeneracy * f / z

    cumulative = np.cumsum(level_pop)
    needed = min(int(np.searchsorted(cumulative, cutoff - 1e-12)), j_hi)
    if needed > j_max:
        raise ValueError(
            f"j_max={j_max} keeps only {cumulative[j_max]:.6f} of the "
            f"population; j_max >= {needed} required for cutoff={cutoff}")

    included = min(needed, j_max)
    kept = float(cumulative[included])
    channels = []
    for j0 in range(included + 1):
        w = float(f[j0] / z / kept)
        for m0 in range(-j0, j0 + 1):
            basis = BasisSpec(j_max, m0)
            channels.append(
                Channel(j0, m0, w, RotorState.basis_state(basis, j0)))
    return ThermalEnsemble(mol, temp_k, j_max, tuple(channels))
