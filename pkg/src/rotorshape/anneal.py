"""Finite-temperature pulse design by Monte-Carlo simulated annealing.

The control field is a natural cubic spline through N equally spaced
knots over one rotational period (endpoint knots pinned to zero, so
N-2 free values).  Each trial displaces every interior knot by an
independent uniform draw whose range shrinks with the figure of merit,
F = ||K - F_target|| / ||F_target||, the normalized distance between
the measured and targeted Fourier coefficients of the post-pulse
orientation signal.  Worse trials are accepted with the Metropolis
probability exp(-dF/T_MC); the fictive temperature is cooled
geometrically every few iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import ThermalEnsemble
from .propagator import SplineField, _ChannelBlocks
from .waveforms import FourierVector


@dataclass(frozen=True)
class SAConfig:
    """Annealing parameters; the defaults are the published working set."""

    t0_mc: float = 0.1          # initial fictive temperature
    n_knots: int = 40           # spline points N (20-60 is the useful range)
    kappa: float = 0.08         # displacement-schedule prefactor
    epsilon: float = 0.01       # displacement-schedule offset
    n_mc: int = 2500            # iteration budget
    e0: float = 6e-5            # initial max field amplitude, a.u.
    p: float = 1.0 / 3.0        # cooling fraction
    cooling_epoch: int = 25     # iterations between cooling events
    temp_floor: float = 1e-10
    area_constrained: bool = False
    seed: int = 0
    steps_per_period: int = 2000
    threads: int = 1

    def __post_init__(self):
        if self.n_knots < 4:
            raise ValueError("need at least 4 spline knots")
        if not 0 < self.p < 1:
            raise ValueError("cooling fraction p must lie in (0, 1)")
        if self.e0 <= 0 or self.t0_mc <= 0:
            raise ValueError("E0 and T0 must be positive")
        if self.n_mc < 1 or self.cooling_epoch < 1:
            raise ValueError("iteration counts must be positive")


def fourier_distance(k: FourierVector, target: FourierVector) -> float:
    """||K - F|| / ||F|| over the complex coefficient vectors."""
    if len(k) != len(target):
        raise ValueError(f"coefficient lengths differ: "
                         f"{len(k)} vs {len(target)}")
    fnorm = target.norm()
    if fnorm == 0:
        raise ValueError("target vector is zero")
    return float(np.linalg.norm(k.coeffs - target.coeffs) / fnorm)


def displacement_max(f: float, cfg: SAConfig) -> float:
    """Scheduled per-knot displacement bound (shrinks as F improves)."""
    return (f + cfg.kappa * math.exp(f - cfg.epsilon)) * cfg.e0


@dataclass
class AnnealResult:
    field: SplineField
    best_f: float
    best_iteration: int
    iterations: np.ndarray
    f_current: np.ndarray = dc_field(repr=False)
    t_mc: np.ndarray = dc_field(repr=False)
    accepted: np.ndarray = dc_field(repr=False)
    area: np.ndarray = dc_field(repr=False)

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(self.f_current)


def anneal(ensemble: ThermalEnsemble, target: FourierVector,
           cfg: SAConfig = SAConfig()) -> AnnealResult:
    """Run one annealing chain; returns the best field seen.

    Trial evaluation always restarts from the ensemble's Boltzmann
    initial channels.  The target may be shorter than the basis
    truncation (the extra levels are climbing headroom, not prescribed
    harmonics); the measured vector is truncated to match.  With
    area_constrained=True a worse trial must also lower
    |integral E dt| to be accepted.
    """
    if len(target) > ensemble.j_max:
        raise ValueError("target is longer than the basis truncation")
    mol = ensemble.molecule
    blocks = _ChannelBlocks(ensemble)
    n = cfg.steps_per_period
    dt = mol.tr / n
    mid = (np.arange(n) + 0.5) * dt
    rng = np.random.default_rng(cfg.seed)

    def evaluate(interior):
        fld = SplineField.from_interior(mol.tr, interior)
        efield = np.ascontiguousarray(fld._spline()(mid))
        final = blocks.propagate(efield, dt, cfg.threads)
        measured = blocks.measure(final)
        short = FourierVector(measured.coeffs[:len(target)],
                              measured.period)
        f = fourier_distance(short, target)
        return fld, f, fld.area()

    current = rng.uniform(-cfg.e0 / 2, cfg.e0 / 2, cfg.n_knots - 2)
    cur_field, cur_f, cur_area = evaluate(current)
    best_interior, best_f, best_it = current.copy(), cur_f, 0

    t_mc = cfg.t0_mc
    rows_it = [0]
    rows_f = [cur_f]
    rows_t = [t_mc]
    rows_acc = [True]
    rows_area = [cur_area]

    for it in range(1, cfg.n_mc + 1):
        dmax = displacement_max(cur_f, cfg)
        trial = current + rng.uniform(-dmax / 2, dmax / 2, cfg.n_knots - 2)
        _, trial_f, trial_area = evaluate(trial)
        df = trial_f - cur_f
        if df < 0:
            accept = True
        else:
            metropolis = rng.random() < math.exp(-df / t_mc)
            accept = metropolis and (
                not cfg.area_constrained or abs(trial_area) < abs(cur_area))
        if accept:
            current, cur_f, cur_area = trial, trial_f, trial_area
        if trial_f < best_f:
            best_interior, best_f, best_it = trial.copy(), trial_f, it
        if it % cfg.cooling_epoch == 0:
            t_mc = max((1.0 - cfg.p) * t_mc, cfg.temp_floor)
        rows_it.append(it)
        rows_f.append(cur_f)
        rows_t.append(t_mc)
        rows_acc.append(accept)
        rows_area.append(cur_area)

    return AnnealResult(
        field=SplineField.from_interior(mol.tr, best_interior),
        best_f=best_f,
        best_iteration=best_it,
        iterations=np.asarray(rows_it),
        f_current=np.asarray(rows_f),
        t_mc=np.asarray(rows_t),
        accepted=np.asarray(rows_acc, dtype=bool),
        area=np.asarray(rows_area),
    )
