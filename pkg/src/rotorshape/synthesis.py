"""Inverse design at zero temperature: the m=0 wave packet whose free
evolution realizes a prescribed Fourier vector.

The defining relations  alpha_j |C_{j+1}||C_j| = |K_j|  and
phi_j - phi_{j+1} = arg K_j  fix every amplitude relative to |C_0|.
Writing x = |C_0|^2, normalization becomes  S_e x + S_o / x = 1  with
S_e (S_o) collecting the even (odd) accumulated factors, a quadratic in
x that has real roots only when 4 S_e S_o <= 1 -- i.e. only targets up
to a maximal amplitude are exactly realizable by a normalized state.
"""

from __future__ import annotations

import numpy as np

from .core import BasisSpec, RotorState, coupling_offdiag, make_coupling
from .waveforms import ZERO_COEFF_TOL, FourierVector


class InfeasibleAmplitude(ValueError):
    """Target amplitude exceeds what a normalized state can realize."""

    def __init__(self, max_scale: float):
        super().__init__(
            f"no normalized state realizes this target; rescale the "
            f"amplitude by at most {max_scale:.6g}")
        self.max_scale = max_scale


class ZeroCoefficient(ValueError):
    """Target has a vanishing harmonic; the amplitude recursion breaks."""


def _accumulate(kabs: np.ndarray, alpha: np.ndarray):
    """Ratios g_j with |C_j| = g_j * |C_0|^{(-1)^j}; returns (g, S_e, S_o)."""
    g = np.ones(len(kabs) + 1)
    for j in range(len(kabs)):
        g[j + 1] = kabs[j] / (alpha[j] * g[j])
    return g, float(np.sum(g[0::2] ** 2)), float(np.sum(g[1::2] ** 2))


def feasibility_bound(k: FourierVector) -> float:
    """Largest factor s such that s*K is exactly synthesizable."""
    kabs = np.abs(k.coeffs)
    _check_nonzero(kabs)
    alpha = coupling_offdiag(BasisSpec(len(kabs), 0))
    _, s_e, s_o = _accumulate(kabs, alpha)
    return float(np.sqrt(1.0 / (4.0 * s_e * s_o)))


def _check_nonzero(kabs: np.ndarray):
    if np.any(kabs < ZERO_COEFF_TOL * np.max(kabs)):
        dead = np.nonzero(kabs < ZERO_COEFF_TOL * np.max(kabs))[0]
        raise ZeroCoefficient(
            f"harmonics {[int(j) + 1 for j in dead]} are zero; every "
            "coefficient must be nonzero for the amplitude recursion")


def synthesize_state(k: FourierVector, j_max: int | None = None,
                     rescale: bool = False,
                     root: str = "large") -> RotorState:
    """Construct the m=0 state realizing K (levels j = 0..len(K)).

    phi_0 = 0.  Both normalization roots x = |C_0|^2 realize K exactly;
    the default "large" root puts more weight in low-j states (lower
    rotational energy), "small" gives the companion solution.  When the
    target amplitude is infeasible, either InfeasibleAmplitude is raised
    (default) or, with rescale=True, the target is scaled down to the
    feasibility boundary (degenerate double root).
    """
    if root not in ("large", "small"):
        raise ValueError("root must be 'large' or 'small'")
    coeffs = np.asarray(k.coeffs, dtype=np.complex128)
    if j_max is not None:
        if j_max > len(coeffs):
            raise ValueError("j_max exceeds the number of coefficients")
        coeffs = coeffs[:j_max]
    kabs = np.abs(coeffs)
    _check_nonzero(kabs)
    alpha = coupling_offdiag(BasisSpec(len(coeffs), 0))
    g, s_e, s_o = _accumulate(kabs, alpha)

    disc = 1.0 - 4.0 * s_e * s_o
    if disc < 0:
        if not rescale:
            raise InfeasibleAmplitude(float(np.sqrt(1.0 / (4.0 * s_e * s_o))))
        scale = np.sqrt(1.0 / (4.0 * s_e * s_o))
        g[1::2] *= scale       # odd ratios carry the amplitude scaling
        x = 1.0 / (2.0 * s_e)  # double root at the boundary
    elif root == "large":
        x = (1.0 + np.sqrt(disc)) / (2.0 * s_e)
    else:
        x = (1.0 - np.sqrt(disc)) / (2.0 * s_e)

    moduli = g * np.sqrt(x) ** np.where(
        np.arange(len(g)) % 2 == 0, 1.0, -1.0)
    phases = np.concatenate(([0.0], -np.cumsum(np.angle(coeffs))))
    amps = moduli * np.exp(1j * phases)
    amps /= np.linalg.norm(amps)   # shed accumulated rounding
    return RotorState(BasisSpec(len(coeffs), 0), amps)


def state_to_fourier(state: RotorState, period: float = 1.0) -> FourierVector:
    """K_j = alpha_j C_j conj(C_{j+1}), mapped to global harmonic index.

    Valid for any fixed-m channel; entries with j < |m| are zero.
    """
    alpha = make_coupling(state.basis).offdiag
    c = state.amps
    local = alpha * c[:-1] * np.conj(c[1:])
    coeffs = np.zeros(state.basis.j_max, dtype=np.complex128)
    coeffs[abs(state.basis.m):] = local
    return FourierVector(coeffs, period)
