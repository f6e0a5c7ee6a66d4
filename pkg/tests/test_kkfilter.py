import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qoclimits.dynamics import ControlProblem, ensemble_average, qubit_hamiltonian, survival_infidelity
from qoclimits.kkfilter import (
    FilterFunction,
    decoherence_function,
    default_omega_grid,
    filter_function,
    kk_error_estimate,
    survival_probability,
    write_filter_csv,
)
from qoclimits.linalg import DensityMatrix
from qoclimits.noise import PowerLawNoise, time_grid
from qoclimits.pulses import Pulse, PulseBasis
from qoclimits.spectra import FlatSpectrum, PowerLawSpectrum

T = 1.0
GRID = time_grid(T, 4096)
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


def test_free_induction_sinc_oracle():
    omega = np.linspace(0, 40 * np.pi, 801)
    filt = filter_function(Pulse.zero(T), GRID, omega)
    expect = 4 / np.pi * T**2 * np.sinc(omega * T / (2 * np.pi)) ** 2
    assert np.max(np.abs(filt.values - expect)) < 1e-6 * expect.max()


@pytest.mark.parametrize("gamma", [0.05, 0.5])
def test_free_induction_chi(gamma):
    filt = filter_function(Pulse.zero(T), GRID)
    chi = decoherence_function(filt, FlatSpectrum(2 * gamma))
    # the sinc^2 tail beyond the default grid costs ~1.3%
    assert chi == pytest.approx(8 * gamma * T, rel=0.02)


@pytest.mark.parametrize("wx", [2 * np.pi * 4, 2 * np.pi * 10, 2 * np.pi * 25])
def test_constant_pulse_peak(wx):
    filt = filter_function(Pulse.constant(wx, T), GRID)
    dw = filt.omega[1] - filt.omega[0]
    assert abs(filt.omega[np.argmax(filt.values)] - wx) <= dw


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_filter_non_negative_and_linear_chi(seed):
    rng = np.random.default_rng(seed)
    basis = PulseBasis(rng.uniform(0, 2 * np.pi * 8, 2), T)
    pulse = Pulse(basis, rng.normal(0, 10, basis.size))
    t = time_grid(T, 512)
    filt = filter_function(pulse, t, np.linspace(0, 200, 257))
    assert np.all(filt.values >= 0)
    phi = PowerLawSpectrum(3.0, 2.0, 1.0, 150.0)
    double = PowerLawSpectrum(6.0, 2.0, 1.0, 150.0)
    chi = decoherence_function(filt, phi)
    assert chi >= 0
    assert decoherence_function(filt, double) == pytest.approx(2 * chi, rel=1e-12)
    assert decoherence_function(filt, FlatSpectrum(0.0)) == 0


def test_survival_probability_examples():
    assert survival_probability(0.0) == 1.0
    assert survival_probability(1e3) == pytest.approx(0.5)
    assert survival_probability(0.2) == pytest.approx(0.90937, abs=1e-5)
    with pytest.raises(ValueError):
        survival_probability(-0.1)


@given(st.floats(0.0, 50.0))
def test_survival_range(chi):
    p = survival_probability(chi)
    assert 0.5 <= p <= 1.0
    assert 0.0 <= 1 - p <= 0.5


def test_kk_zero_noise():
    rep = kk_error_estimate(Pulse.constant(10.0, T), FlatSpectrum(0.0), GRID)
    assert rep.chi == 0 and rep.epsilon == 0 and rep.survival == 1


@pytest.mark.parametrize("alpha", [2.0, 4.0])
def test_kk_slope_in_omega_x(alpha):
    model = PowerLawNoise(alpha, 4 * np.pi**2)
    lines = model.line_spectrum(T, GRID[1])
    wx = 2 * np.pi * np.array([2, 4, 8, 16])
    eps = [kk_error_estimate(Pulse.constant(w, T), lines, GRID).epsilon for w in wx]
    slope = np.polyfit(np.log(wx), np.log(eps), 1)[0]
    assert slope == pytest.approx(-alpha, abs=0.3)


def test_kk_matches_monte_carlo():
    drift, ctrl, noise = qubit_hamiltonian("h3")
    plus = DensityMatrix.from_pure(PLUS)
    prob = ControlProblem(drift, ctrl, noise, plus, plus, T, 4096)
    model = PowerLawNoise(2.0, 4 * np.pi**2)
    pulse = Pulse.constant(2 * np.pi * 16, T)
    rep = kk_error_estimate(pulse, model.line_spectrum(T, prob.dt), prob.grid)
    assert rep.chi < 0.1
    rho, _ = ensemble_average(prob, pulse, model, 100, 0)
    mc = survival_infidelity(plus, rho)
    assert abs(rep.epsilon - mc) <= 0.25 * mc


def test_kk_narrowband_and_warning():
    model = PowerLawNoise(2.0, 4 * np.pi**2)
    wx = 2 * np.pi * 16
    rep = kk_error_estimate(Pulse.constant(wx, T), model.spectrum(T, GRID[1]), GRID)
    assert rep.omega_c == pytest.approx(2 * wx, rel=0.1)
    assert rep.epsilon_narrowband == pytest.approx(rep.epsilon, rel=0.5)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        kk_error_estimate(Pulse.zero(T), FlatSpectrum(10.0), GRID)
    assert any("small-noise" in str(w.message) for w in rec)


def test_default_grid_and_csv(tmp_path):
    g = default_omega_grid(Pulse.constant(2 * np.pi * 10, T), GRID)
    assert g[0] == 0 and g[-1] == pytest.approx(8 * 2 * np.pi * 10) and g.size == 4096
    assert default_omega_grid(Pulse.zero(T), GRID)[-1] == pytest.approx(16 * np.pi)
    filt = FilterFunction(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    write_filter_csv(tmp_path / "f.csv", filt)
    assert open(tmp_path / "f.csv").read().splitlines()[0] == "omega,F"
    with pytest.raises(ValueError):
        FilterFunction(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        FilterFunction(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
