"""rotorshape: shape the field-free orientation signal <cos theta>(t) of a
linear molecule with THz control pulses.

Workflow: pick a periodic target waveform, synthesize the rotational wave
packet realizing it (zero temperature), design a driving field by gradient
optimal control or, at finite temperature, by Monte-Carlo simulated
annealing against the Fourier coefficients of the signal, then analyze and
stress-test the resulting fields.
"""

from ._backend import BACKEND
from .core import (BasisSpec, Channel, CouplingMatrix, Molecule, RotorState,
                   ThermalEnsemble, boltzmann_channels, default_j_max,
                   default_target_harmonics, expectation_cos,
                   expectation_cos_power, make_coupling, molecule,
                   molecule_from_config)
from .units import unit_convert
from .waveforms import (FourierVector, WaveformSpec, analytic_fourier,
                        fourier_to_timeseries, sample_signal, sigma_factors)
from .synthesis import (InfeasibleAmplitude, ZeroCoefficient,
                        feasibility_bound, state_to_fourier, synthesize_state)
from .propagator import (NonFiniteField, PiecewiseConstantField, SplineField,
                         TruncationWarning, ensemble_orientation, free_evolve,
                         measure_fourier, propagate, propagate_ensemble,
                         pulse_orientation)
from .grape import GrapeConfig, fidelity, grape_gradient, optimize_pulse, projection
from .anneal import SAConfig, anneal, displacement_max, fourier_distance
from .analysis import (AnalyticFieldModel, FitResult, eval_model, field_model,
                       field_spectrum, fit_model, initial_model_guess,
                       orientation_derivative, robustness_scan,
                       shape_distance)

__version__ = "0.1.0"
