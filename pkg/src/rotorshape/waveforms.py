"""Target periodic waveforms and their Fourier description.

The orientation signal of a free rotor is a Fourier series over harmonics
of the rotational frequency with no DC term, so admissible targets are
zero-area periodic signals.  Three families are provided: rectangular
(duty ratio r), triangular (skew ratio r) and the sawtooth obtained as
the r->1 limit of the triangular shape.  Harmonic n may optionally be
damped by sigma_n = sinc(n pi / N) to tame the Gibbs-Wilbraham overshoot
of the truncated series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

KINDS = ("rectangular", "triangular", "sawtooth")

# |sin(pi n r)| below this is treated as a vanishing harmonic (the
# floating-point stand-in for "r must be irrational")
ZERO_COEFF_TOL = 1e-9


class NearZeroCoefficientWarning(UserWarning):
    """Some requested harmonic has (numerically) zero amplitude."""


@dataclass(frozen=True)
class WaveformSpec:
    """Periodic zero-area target signal, amplitudes in <cos theta> units."""

    kind: str
    a0: float = 1.0
    r: float = 0.5
    sigma_smoothing: bool = False
    n_sigma: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if not 0 < self.r < 1:
            raise ValueError("r must lie strictly inside (0, 1)")
        if self.n_sigma is not None and self.n_sigma < 1:
            raise ValueError("n_sigma must be a positive integer")


@dataclass(frozen=True)
class FourierVector:
    """Complex coefficients K_j, j = 0..j_max-1; entry j belongs to
    harmonic n = j+1 of the reference period (no DC entry exists)."""

    coeffs: np.ndarray = field(repr=False)
    period: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.period <= 0:
            raise ValueError("period must be positive")

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def j_max(self) -> int:
        return len(self.coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def sigma_factors(n: np.ndarray, n_sigma: int) -> np.ndarray:
    """Lanczos damping sinc(n pi / N) for harmonic numbers n."""
    return np.sinc(np.asarray(n, dtype=float) / n_sigma)


def analytic_fourier(spec: WaveformSpec, j_max: int,
                     period: float = 1.0) -> FourierVector:
    """Closed-form K_j of the target signal, j = 0..j_max-1.

    With smoothing enabled, N defaults to j_max+1 so the highest retained
    harmonic is strongly damped but nonzero.  Emits
    NearZeroCoefficientWarning when sin(pi n r) vanishes for some
    retained harmonic (rational r); synthesis will reject such targets.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    n = np.arange(1, j_max + 1, dtype=float)
    a0, r = spec.a0, spec.r
    if spec.kind == "rectangular":
        amp = a0 * np.sin(np.pi * n * r) / ((1 - r) * np.pi * n)
        phase = -np.pi * n * r
    elif spec.kind == "triangular":
        amp = a0 * np.sin(np.pi * n * r) / (r * (1 - r) * np.pi**2 * n**2)
        phase = -np.pi * n * r - np.pi / 2
    else:  # sawtooth
        amp = a0 / (np.pi * n)
        phase = -np.pi * n - np.pi / 2
    coeffs = amp * np.exp(1j * phase)
    if spec.kind != "sawtooth":
        dead = np.abs(np.sin(np.pi * n * r)) < ZERO_COEFF_TOL
        if np.any(dead):
            harm = ", ".join(str(int(k) + 1) for k in np.nonzero(dead)[0])
            warnings.warn(
                f"harmonics {harm} of the {spec.kind} signal vanish for "
                f"r={r!r}; the target is not synthesizable at this j_max",
                NearZeroCoefficientWarning, stacklevel=2)
    if spec.sigma_smoothing:
        coeffs = coeffs * sigma_factors(n, spec.n_sigma or (j_max + 1))
    return FourierVector(coeffs, period)


def sample_signal(spec: WaveformSpec, times, period: float = 1.0):
    """Exact piecewise values of the target signal (period-reduced)."""
    u = np.mod(np.asarray(times, dtype=float) / period, 1.0)
    a0, r = spec.a0, spec.r
    if spec.kind == "rectangular":
        return np.where(u < r, a0, -r / (1 - r) * a0)
    if spec.kind == "triangular":
        up = a0 * (2 * u / r - 1)
        down = a0 * ((1 + r) / (1 - r) - 2 * u / (1 - r))
        return np.where(u < r, up, down)
    # sawtooth: falling ramp through zero at u=0, jump at half period
    return np.where(u <= 0.5, -2 * a0 * u, 2 * a0 * (1 - u))


def fourier_to_timeseries(k: FourierVector, times):
    """Evaluate s(t) = sum_j [K_j e^{i 2 pi (j+1) t / T} + c.c.]."""
    u = np.mod(np.asarray(times, dtype=float) / k.period, 1.0)
    n = np.arange(1, len(k) + 1)
    phases = np.exp(2j * np.pi * np.outer(u, n))
    return 2.0 * (phases @ k.coeffs).real
