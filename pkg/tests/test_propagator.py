import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from rotorshape.core import (BasisSpec, Molecule, RotorState,
                             boltzmann_channels, expectation_cos,
                             make_coupling, molecule)
from rotorshape.propagator import (NonFiniteField, PiecewiseConstantField,
                                   SplineField, TruncationWarning,
                                   ensemble_orientation, free_evolve,
                                   measure_fourier, propagate,
                                   propagate_ensemble, pulse_orientation)
from rotorshape.synthesis import state_to_fourier
from rotorshape.waveforms import fourier_to_timeseries


def zero_field(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def random_state(j_max, m=0, seed=0):
    rng = np.random.default_rng(seed)
    dim = j_max - abs(m) + 1
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return RotorState(BasisSpec(j_max, m), amps / np.linalg.norm(amps))


# ----------------------------------------------------------- field objects

def test_spline_field_basics():
    field = SplineField.from_interior(10.0, [1e-5, -2e-5, 3e-5])
    assert field.values[0] == field.values[-1] == 0.0
    assert np.allclose(field.values_at(field.knots), field.values)
    assert field.values_at(np.array([-1.0, 11.0])).tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        SplineField(10.0, np.array([1e-5, 0.0, 0.0, 0.0]))
    with pytest.raises(NonFiniteField):
        SplineField(10.0, np.array([0.0, np.nan, 0.0, 0.0]))


def test_spline_area_matches_quadrature():
    field = SplineField.from_interior(7.0, [2e-5, 1e-5, -4e-5, 1e-5])
    grid = np.linspace(0, 7.0, 200001)
    numeric = np.trapezoid(field.values_at(grid), grid)
    assert field.area() == pytest.approx(numeric, abs=1e-12)


def test_pwc_envelope_endpoints_and_smoothness():
    field = PiecewiseConstantField(1.0, np.full(64, 1e-4), 0.05)
    assert field.values_at(np.array([0.0]))[0] == 0.0
    assert field.values_at(np.array([1.0]))[0] == pytest.approx(0.0,
                                                                abs=1e-30)
    # C1 at the ramp boundary: envelope slope -> 0 from inside the ramp
    eps = 1e-7
    e = field.envelope(np.array([0.05 - eps, 0.05, 0.05 + eps]))
    assert e[1] == pytest.approx(1.0, abs=1e-12)
    assert abs(e[1] - e[0]) / eps < 1e-3  # sin^2 ramp: slope ~ pi^2 eps/2L^2
    assert e[2] == 1.0


# ------------------------------------------------------------- propagation

def test_zero_field_full_period_revival():
    mol = molecule("OCS")
    st = random_state(6, seed=1)
    out = propagate(mol, st, zero_field, mol.tr, n_steps=400)
    assert abs(abs(np.vdot(out.amps, st.amps)) ** 2 - 1) < 1e-12
    assert np.max(np.abs(out.amps - st.amps)) < 1e-10


def test_half_period_flips_orientation():
    mol = molecule("OCS")
    amps = np.array([1, 1], dtype=complex) / math.sqrt(2)
    st = RotorState(BasisSpec(1, 0), amps)
    before = expectation_cos(st)
    out = propagate(mol, st, zero_field, mol.tr / 2, n_steps=200)
    assert expectation_cos(out) == pytest.approx(-before, abs=1e-12)


def test_constant_field_no_rotor_term_matches_expm():
    # B ~ 0 test mode: the Strang step is exact at any dt
    mol = Molecule("B0", 1e-300, 0.28)
    basis = BasisSpec(7, 0)
    st = random_state(7, seed=3)
    e0, t_span = 3e-4, 1.0e4
    out = propagate(mol, st, lambda t: np.full_like(t, e0), t_span,
                    n_steps=7)
    u = expm(1j * mol.mu0 * e0 * t_span * make_coupling(basis).dense())
    assert np.max(np.abs(out.amps - u @ st.amps)) < 1e-12


def test_constant_field_matches_expm_oracle():
    # full Hamiltonian against the dense matrix exponential
    mol = molecule("OCS")
    basis = BasisSpec(9, 0)
    st = random_state(9, seed=4)
    e0 = 1e-4
    t_span = mol.tr / 200
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        out = propagate(mol, st, lambda t: np.full_like(t, e0), t_span,
                        n_steps=20000)
    j = basis.j_values().astype(float)
    h = mol.b * np.diag(j * (j + 1)) - mol.mu0 * e0 * \
        make_coupling(basis).dense()
    oracle = expm(-1j * h * t_span) @ st.amps
    assert np.max(np.abs(out.amps - oracle)) < 1e-10


def test_strang_second_order_convergence():
    mol = molecule("OCS")
    rng = np.random.default_rng(8)
    field = SplineField.from_interior(mol.tr / 4,
                                      rng.uniform(-5e-4, 5e-4, 14))
    st = random_state(8, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        ref = propagate(mol, st, field, field.period, n_steps=16 * 512)
        errs = [np.max(np.abs(
            propagate(mol, st, field, field.period, n_steps=n).amps
            - ref.amps)) for n in (512, 1024)]
    ratio = errs[0] / errs[1]
    assert 3.0 < ratio < 5.5


def test_norm_preserved_over_many_steps():
    mol = molecule("OCS")
    rng = np.random.default_rng(9)
    field = SplineField.from_interior(mol.tr, rng.uniform(-5e-4, 5e-4, 30))
    st = random_state(9, seed=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        out = propagate(mol, st, field, mol.tr, n_steps=10_000)
    assert abs(out.norm() - 1.0) < 1e-12


def test_nonfinite_field_rejected():
    mol = molecule("OCS")
    st = random_state(3)
    with pytest.raises(NonFiniteField):
        propagate(mol, st, lambda t: np.full_like(t, np.inf), 1.0,
                  n_steps=2)


def test_truncation_warning_fires():
    mol = molecule("OCS")
    st = RotorState.ground(3)
    strong = 5e-3
    with pytest.warns(TruncationWarning):
        propagate(mol, st, lambda t: np.full_like(t, strong), mol.tr / 10,
                  n_steps=500)


def test_step_validation():
    mol = molecule("OCS")
    st = random_state(3)
    with pytest.raises(ValueError):
        propagate(mol, st, zero_field, 1.0, dt=0.3)
    with pytest.raises(ValueError):
        propagate(mol, st, zero_field, 1.0, dt=0.1, n_steps=10)


# ----------------------------------------------------------- free evolution

def test_free_evolve_identity_and_revival():
    mol = molecule("CO")
    st = random_state(7, seed=11)
    assert np.array_equal(free_evolve(mol, st, 0.0).amps, st.amps)
    out = free_evolve(mol, st, mol.tr)
    assert np.max(np.abs(out.amps - st.amps)) < 1e-12


def test_free_evolution_matches_series():
    mol = molecule("CO")
    st = random_state(8, seed=12)
    k = state_to_fourier(st, period=mol.tr)
    taus = np.linspace(0, 2 * mol.tr, 61)
    series = fourier_to_timeseries(k, taus)
    direct = np.array([expectation_cos(free_evolve(mol, st, t))
                       for t in taus])
    assert np.max(np.abs(series - direct)) < 1e-12


def test_free_evolve_nonzero_m():
    mol = molecule("CO")
    st = random_state(6, m=2, seed=13)
    out = free_evolve(mol, st, mol.tr)
    assert np.max(np.abs(out.amps - st.amps)) < 1e-12


# --------------------------------------------------------------- ensembles

def test_zero_temperature_matches_single_channel():
    mol = molecule("OCS")
    ens = boltzmann_channels(mol, 0.0, j_max=6)
    rng = np.random.default_rng(14)
    field = SplineField.from_interior(mol.tr, rng.uniform(-2e-4, 2e-4, 10))
    taus = np.linspace(0, mol.tr, 40)
    combined = ensemble_orientation(ens, field, taus, n_steps=800)
    single = propagate(mol, RotorState.ground(6), field, mol.tr,
                       n_steps=800)
    direct = np.array([expectation_cos(free_evolve(mol, single, t))
                       for t in taus])
    assert np.max(np.abs(combined - direct)) < 1e-12


def test_thermal_zero_field_is_isotropic():
    mol = molecule("CO")
    ens = boltzmann_channels(mol, 30.0)
    taus = np.linspace(0, mol.tr, 17)
    vals = ensemble_orientation(ens, SplineField.from_interior(
        mol.tr, np.zeros(10)), taus, n_steps=100)
    assert np.max(np.abs(vals)) < 1e-14


def test_propagation_keeps_weights_and_m():
    mol = molecule("CO")
    ens = boltzmann_channels(mol, 10.0, j_max=10)
    rng = np.random.default_rng(15)
    field = SplineField.from_interior(mol.tr, rng.uniform(-5e-5, 5e-5, 20))
    out = propagate_ensemble(ens, field, n_steps=300)
    assert out.weights_sum() == pytest.approx(1.0, abs=1e-12)
    for before, after in zip(ens.channels, out.channels):
        assert after.m0 == before.m0 and after.j0 == before.j0
        assert after.weight == before.weight
        assert after.state.basis.m == before.m0
        assert abs(after.state.norm() - 1.0) < 1e-12


def test_plus_minus_m_channels_evolve_identically():
    mol = molecule("CO")
    ens = boltzmann_channels(mol, 10.0, j_max=10)
    rng = np.random.default_rng(16)
    field = SplineField.from_interior(mol.tr, rng.uniform(-5e-5, 5e-5, 20))
    out = propagate_ensemble(ens, field, n_steps=200)
    states = {(c.j0, c.m0): c.state.amps for c in out.channels}
    for (j0, m0), amps in states.items():
        if m0 > 0:
            assert np.array_equal(amps, states[(j0, -m0)])


def test_measure_fourier_matches_quadrature_projection():
    mol = molecule("CO")
    ens = boltzmann_channels(mol, 10.0, j_max=9)
    rng = np.random.default_rng(17)
    field = SplineField.from_interior(mol.tr, rng.uniform(-1e-4, 1e-4, 20))
    out = propagate_ensemble(ens, field, n_steps=400)
    k = measure_fourier(out)
    m = 4096
    taus = np.arange(m) / m * mol.tr
    vals = ensemble_orientation(ens, field, taus, n_steps=400)
    proj = (np.fft.fft(vals) / m)[1:len(k) + 1]
    assert np.max(np.abs(proj - k.coeffs)) < 1e-8


def test_measure_fourier_reduces_to_state_to_fourier():
    mol = molecule("OCS")
    st = random_state(6, seed=18)
    k1 = measure_fourier(st, period=mol.tr)
    k2 = state_to_fourier(st, period=mol.tr)
    assert np.array_equal(k1.coeffs, k2.coeffs)


def test_ground_state_ensemble_no_pulse_zero_vector():
    mol = molecule("OCS")
    ens = boltzmann_channels(mol, 0.0, j_max=5)
    out = propagate_ensemble(ens, SplineField.from_interior(
        mol.tr, np.zeros(8)), n_steps=50)
    assert np.max(np.abs(measure_fourier(out).coeffs)) < 1e-14


def test_pulse_orientation_trace():
    mol = molecule("OCS")
    ens = boltzmann_channels(mol, 0.0, j_max=6)
    rng = np.random.default_rng(19)
    field = SplineField.from_interior(mol.tr, rng.uniform(-2e-4, 2e-4, 10))
    times, vals = pulse_orientation(ens, field, n_steps=500)
    assert len(times) == len(vals) == 500
    assert times[-1] == pytest.approx(mol.tr)
    # end-of-pulse value equals the post-pulse series at tau=0
    tail = ensemble_orientation(ens, field, [0.0], n_steps=500)
    assert vals[-1] == pytest.approx(tail[0], abs=1e-12)
    assert np.all(np.abs(vals) <= 1.0)
