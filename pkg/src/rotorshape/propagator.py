"""Time evolution under H(t) = B J^2 - mu0 E(t) cos(theta).

propagate() takes second-order Strang steps with exact sub-propagators:
half-step free-rotor phases, then the coupling exponential applied in
the cached eigenbasis of the tridiagonal cos-theta matrix, evaluated at
the field value of the slice midpoint.  Every step is exactly unitary.
free_evolve() applies the analytic field-free phases with the time
argument reduced modulo the rotational period, so revivals are exact.

Thermal ensembles are propagated as one matrix block per |m| (channels
with +/-m evolve identically from |j0,±m> and are folded together).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .core import (BasisSpec, RotorState, ThermalEnsemble, make_coupling)
from .waveforms import FourierVector

#: default time resolution: dt = T_r / 20000
DEFAULT_STEPS_PER_PERIOD = 20000

#: population allowed in the top two j levels before warning
TRUNCATION_GUARD = 1e-4


class NonFiniteField(ValueError):
    """Field evaluated to NaN or infinity."""


class TruncationWarning(UserWarning):
    """Wave packet reached the top of the truncated j basis."""


@dataclass(frozen=True)
class SplineField:
    """Natural cubic spline through N equally spaced knots on [0, period];
    first and last knot values are pinned to zero, field is zero outside."""

    period: float
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if len(vals) < 4:
            raise ValueError("a cubic spline needs at least 4 knots")
        if vals[0] != 0.0 or vals[-1] != 0.0:
            raise ValueError("endpoint knot values must be zero")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteField("knot values must be finite")

    @classmethod
    def from_interior(cls, period: float, interior) -> "SplineField":
        return cls(period, np.concatenate(([0.0], interior, [0.0])))

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(0.0, self.period, len(self.values))

    def _spline(self) -> CubicSpline:
        cached = getattr(self, "_cs", None)
        if cached is None:
            cached = CubicSpline(self.knots, self.values, bc_type="natural")
            object.__setattr__(self, "_cs", cached)
        return cached

    def values_at(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.period)
        out = np.zeros_like(t)
        out[inside] = self._spline()(t[inside])
        return out

    def area(self) -> float:
        """Exact spline quadrature of the field over [0, period]."""
        return float(self._spline().integrate(0.0, self.period))


@dataclass(frozen=True)
class PiecewiseConstantField:
    """M constant slices on [0, period] under a fixed sin^2 on/off ramp
    envelope; zero outside the window."""

    period: float
    amps: np.ndarray = dc_field(repr=False)
    ramp_fraction: float = 0.05

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=float)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)
        if len(amps) < 2:
            raise ValueError("need at least two slices")
        if not 0 < self.ramp_fraction < 0.5:
            raise ValueError("ramp_fraction must lie in (0, 0.5)")
        if not np.all(np.isfinite(amps)):
            raise NonFiniteField("slice amplitudes must be finite")

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        ramp = self.ramp_fraction * self.period
        env = np.ones_like(t)
        rising = t < ramp
        falling = t > self.period - ramp
        env[rising] = np.sin(0.5 * np.pi * t[rising] / ramp) ** 2
        env[falling] = np.sin(
            0.5 * np.pi * (self.period - t[falling]) / ramp) ** 2
        env[(t < 0) | (t > self.period)] = 0.0
        return env

    def values_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip((t / self.period * len(self.amps)).astype(int),
                      0, len(self.amps) - 1)
        out = self.amps[idx] * self.envelope(t)
        out[(t < 0) | (t > self.period)] = 0.0
        return out

    def area(self) -> float:
        # envelope-weighted sum, dense midpoint quadrature
        tgrid = np.linspace(0, self.period, 20 * len(self.amps) + 1)
        mid = 0.5 * (tgrid[1:] + tgrid[:-1])
        return float(np.sum(self.values_at(mid)) * (tgrid[1] - tgrid[0]))


def _field_values(field, times) -> np.ndarray:
    vals = field.values_at(times) if hasattr(field, "values_at") \
        else field(times)
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteField("field evaluated to a non-finite value")
    return np.ascontiguousarray(vals)


def _resolve_steps(t_span: float, dt: float | None, n_steps: int | None):
    if (dt is None) == (n_steps is None):
        raise ValueError("give exactly one of dt or n_steps")
    if dt is not None:
        n_steps = round(t_span / dt)
        if n_steps < 1 or abs(n_steps * dt - t_span) > 1e-9 * abs(t_span):
            raise ValueError("dt must divide t_span")
        return n_steps
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    return int(n_steps)


def _halfphase(mol, basis: BasisSpec, dt: float) -> np.ndarray:
    j = basis.j_values().astype(float)
    return np.ascontiguousarray(np.exp(-0.5j * mol.b * j * (j + 1) * dt))


def _check_truncation(amps_block: np.ndarray):
    if amps_block.shape[0] > 2:
        top = float(np.max(np.sum(np.abs(amps_block[-2:]) ** 2, axis=0)))
        if top > TRUNCATION_GUARD:
            warnings.warn(
                f"population {top:.2e} in the top two j levels; "
                "increase j_max", TruncationWarning, stacklevel=3)


def propagate(mol, state: RotorState, field, t_span: float,
              dt: float | None = None,
              n_steps: int | None = None) -> RotorState:
    """Evolve a channel state under the field over [0, t_span]."""
    if dt is None and n_steps is None:
        dt = mol.tr / DEFAULT_STEPS_PER_PERIOD
    n = _resolve_steps(t_span, dt, n_steps)
    step = t_span / n
    mid = (np.arange(n) + 0.5) * step
    efield = _field_values(field, mid)
    vals, vecs = make_coupling(state.basis).eig()
    # explicit copy: the kernel evolves in place, the input must survive
    psi = np.array(state.amps[:, None], dtype=np.complex128, order="C")
    _backend.strang_evolve(psi, _halfphase(mol, state.basis, step),
                           vecs, vals, efield, mol.mu0 * step)
    _check_truncation(psi)
    return RotorState(state.basis, psi[:, 0])


def free_evolve(mol, state: RotorState, tau: float) -> RotorState:
    """Analytic field-free evolution by tau (exact revival at k*T_r)."""
    u = math.fmod(tau, mol.tr) / mol.tr
    j = state.basis.j_values().astype(float)
    # e^{-i B j(j+1) tau}; whole periods drop out since j(j+1) is even
    phases = np.exp(-1j * math.pi * j * (j + 1) * u)
    return RotorState(state.basis, state.amps * phases)


class _ChannelBlocks:
    """Ensemble channels grouped by |m| for block propagation.

    Channels (j0, +m) and (j0, -m) share the coupling matrix and the
    initial state |j0>, so each unique (|m|, j0) pair is propagated once
    and its weight counted for both signs.
    """

    def __init__(self, ensemble: ThermalEnsemble):
        self.ensemble = ensemble
        self.mol = ensemble.molecule
        self.j_max = ensemble.j_max
        groups: dict[int, dict[int, float]] = {}
        for ch in ensemble.channels:
            groups.setdefault(abs(ch.m0), {})
            groups[abs(ch.m0)][ch.j0] = \
                groups[abs(ch.m0)].get(ch.j0, 0.0) + ch.weight
        self.blocks = []
        for m_abs in sorted(groups):
            basis = BasisSpec(self.j_max, m_abs)
            j0s = sorted(groups[m_abs])
            vals, vecs = make_coupling(basis).eig()
            psi0 = np.zeros((basis.dim, len(j0s)), dtype=np.complex128)
            for c, j0 in enumerate(j0s):
                psi0[j0 - m_abs, c] = 1.0
            w = np.array([groups[m_abs][j0] for j0 in j0s])
            self.blocks.append({
                "m_abs": m_abs, "basis": basis, "j0s": j0s,
                "vals": vals, "vecs": vecs, "psi0": psi0, "weights": w,
            })

    def _run(self, fn, threads: int):
        if threads > 1 and len(self.blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(fn, self.blocks))
        return [fn(blk) for blk in self.blocks]

    def propagate(self, efield: np.ndarray, dt: float, threads: int = 1):
        """Evolve all blocks; returns the final per-block amplitude
        matrices (one column per unique (|m|, j0) channel)."""
        mu_dt = self.mol.mu0 * dt

        def run(blk):
            psi = blk["psi0"].copy()
            hp = _halfphase(self.mol, blk["basis"], dt)
            _backend.strang_evolve(psi, hp, blk["vecs"], blk["vals"],
                                   efield, mu_dt)
            _check_truncation(psi)
            return psi

        return self._run(run, threads)

    def measure(self, final_blocks) -> FourierVector:
        """Ensemble Fourier coefficients K_j from post-pulse blocks."""
        coeffs = np.zeros(self.j_max, dtype=np.complex128)
        for blk, psi in zip(self.blocks, final_blocks):
            alpha = make_coupling(blk["basis"]).offdiag
            cross = np.sum(blk["weights"] * psi[:-1] * np.conj(psi[1:]),
                           axis=1)
            coeffs[blk["m_abs"]:] += alpha * cross
        return FourierVector(coeffs, self.mol.tr)

    def pulse_expectation(self, efield: np.ndarray, dt: float,
                          threads: int = 1):
        """Weighted <cos theta> after every step during the pulse."""
        mu_dt = self.mol.mu0 * dt

        def run(blk):
            psi = blk["psi0"].copy()
            hp = _halfphase(self.mol, blk["basis"], dt)
            alpha = make_coupling(blk["basis"]).offdiag
            expect = np.empty((len(efield), psi.shape[1]))
            _backend.strang_evolve_expect(
                psi, hp, blk["vecs"], blk["vals"], efield, mu_dt,
                np.ascontiguousarray(alpha), expect)
            return expect @ blk["weights"]

        return np.sum(self._run(run, threads), axis=0)

    def final_states(self, final_blocks):
        """Per-channel RotorStates in the ensemble's channel order."""
        states = []
        for ch in self.ensemble.channels:
            for blk, psi in zip(self.blocks, final_blocks):
                if blk["m_abs"] == abs(ch.m0):
                    col = blk["j0s"].index(ch.j0)
                    basis = BasisSpec(self.j_max, ch.m0)
                    states.append(RotorState(basis, psi[:, col].copy()))
                    break
        return states


def _pulse_grid(field, t_span, dt, n_steps, mol):
    if t_span is None:
        t_span = field.period
    if dt is None and n_steps is None:
        dt = mol.tr / DEFAULT_STEPS_PER_PERIOD
    n = _resolve_steps(t_span, dt, n_steps)
    step = t_span / n
    mid = (np.arange(n) + 0.5) * step
    return step, _field_values(field, mid)


def propagate_ensemble(ensemble: ThermalEnsemble, field,
                       t_span: float | None = None,
                       dt: float | None = None,
                       n_steps: int | None = None,
                       threads: int = 1) -> ThermalEnsemble:
    """Drive every channel over the pulse window; returns a new ensemble
    holding the post-pulse channel states (weights untouched)."""
    blocks = _ChannelBlocks(ensemble)
    step, efield = _pulse_grid(field, t_span, dt, n_steps, ensemble.molecule)
    final = blocks.propagate(efield, step, threads)
    return ensemble.replace_states(blocks.final_states(final))


def measure_fourier(obj, j_max: int | None = None,
                    period: float | None = None) -> FourierVector:
    """Fourier coefficients of the field-free orientation signal.

    Accepts a post-pulse ThermalEnsemble (weighted sum over channels) or
    a single RotorState (period defaults to 1).
    """
    if isinstance(obj, ThermalEnsemble):
        coeffs = np.zeros(obj.j_max, dtype=np.complex128)
        for ch in obj.channels:
            alpha = make_coupling(ch.state.basis).offdiag
            c = ch.state.amps
            coeffs[abs(ch.m0):] += ch.weight * alpha * c[:-1] * np.conj(c[1:])
        vec = FourierVector(coeffs, obj.molecule.tr)
    elif isinstance(obj, RotorState):
        from .synthesis import state_to_fourier
        vec = state_to_fourier(obj, period or 1.0)
    else:
        raise TypeError("expected a ThermalEnsemble or RotorState")
    if j_max is not None and j_max != len(vec):
        coeffs = np.zeros(j_max, dtype=np.complex128)
        n = min(j_max, len(vec))
        coeffs[:n] = vec.coeffs[:n]
        vec = FourierVector(coeffs, vec.period)
    return vec


def ensemble_orientation(ensemble: ThermalEnsemble, field, taus,
                         dt: float | None = None,
                         n_steps: int | None = None,
                         threads: int = 1) -> np.ndarray:
    """Post-pulse <cos theta>(tau): propagate all channels over the pulse
    window, then evaluate the weighted field-free series at taus."""
    blocks = _ChannelBlocks(ensemble)
    step, efield = _pulse_grid(field, None, dt, n_steps, ensemble.molecule)
    final = blocks.propagate(efield, step, threads)
    k = blocks.measure(final)
    from .waveforms import fourier_to_timeseries
    return fourier_to_timeseries(k, np.asarray(taus, dtype=float))


def pulse_orientation(ensemble: ThermalEnsemble, field,
                      dt: float | None = None,
                      n_steps: int | None = None,
                      threads: int = 1):
    """(times, <cos theta>) sampled after every step during the pulse."""
    blocks = _ChannelBlocks(ensemble)
    step, efield = _pulse_grid(field, None, dt, n_steps, ensemble.molecule)
    values = blocks.pulse_expectation(efield, step, threads)
    times = (np.arange(len(efield)) + 1) * step
    return times, values
