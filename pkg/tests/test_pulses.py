import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qoclimits.noise import time_grid
from qoclimits.pulses import (
    Pulse,
    PulseBasis,
    PowerConstraint,
    bandwidth_for_dof,
    degrees_of_freedom,
    evaluate,
    modulation_functions,
    pulse_power,
    pulse_power_spectrum,
    random_basis,
    rescale_to_power,
    write_pulse_csv,
)


def _random_pulse(seed, n_freq=3, band=(0.0, 2 * np.pi * 10), depth=2):
    rng = np.random.default_rng(seed)
    pulse = Pulse.constant(rng.uniform(1, 5), 1.0)
    for _ in range(depth):
        basis = random_basis(rng, n_freq, band, 1.0)
        pulse = Pulse(basis, rng.standard_normal(basis.size), carryover=(pulse, rng.uniform(0.5, 1.5)))
    return pulse


def test_evaluate_examples():
    basis = PulseBasis(np.array([2 * np.pi]), 1.0)
    assert evaluate(Pulse(basis, [0.0, 0.0]), 0.3) == 0.0
    assert evaluate(Pulse(basis, [0.0, 1.0]), 0.25) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        evaluate(Pulse(basis, [0.0, 1.0]), 1.5)
    with pytest.raises(ValueError):
        Pulse(basis, [1.0])
    with pytest.raises(ValueError):
        PulseBasis(np.array([5.0]), 1.0, omega_min=0.0, omega_max=1.0)


@given(st.integers(0, 10_000), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_flatten_matches_nested_sum(seed, depth):
    pulse = _random_pulse(seed, depth=depth)
    t = np.linspace(0, 1, 101)
    assert np.allclose(pulse.flatten().sample(t), pulse.sample(t), atol=1e-12)
    assert np.allclose(pulse.flatten().integral(t), pulse.integral(t), atol=1e-12)


def test_record_round_trip(tmp_path):
    pulse = _random_pulse(3)
    rec = json.loads(json.dumps(pulse.to_record()))
    back = Pulse.from_record(rec)
    t = np.linspace(0, 1, 33)
    assert np.array_equal(back.sample(t), pulse.flatten().sample(t))
    path = tmp_path / "p.csv"
    write_pulse_csv(path, pulse, t)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], pulse.sample(t))


def test_rescale_examples():
    t = time_grid(1.0, 4096)
    pulse = _random_pulse(1)
    target = PowerConstraint.from_energy((2 * np.pi * 4) ** 2, 1.0)
    scaled = rescale_to_power(pulse, target, t)
    assert pulse_power(scaled, t) * 1.0 == pytest.approx((2 * np.pi * 4) ** 2, rel=1e-12)
    again = rescale_to_power(scaled, target, t)
    assert np.allclose(again.sample(t), scaled.sample(t), rtol=1e-12)
    zero = rescale_to_power(pulse, PowerConstraint(0.0), t)
    assert np.all(zero.sample(t) == 0)
    with pytest.raises(ValueError):
        rescale_to_power(Pulse.zero(1.0), target, t)


@given(st.integers(0, 10_000), st.floats(0.1, 1e4))
@settings(max_examples=30, deadline=None)
def test_rescale_preserves_shape(seed, power):
    t = time_grid(1.0, 512)
    pulse = _random_pulse(seed)
    scaled = rescale_to_power(pulse, PowerConstraint(power), t)
    a, b = pulse.sample(t), scaled.sample(t)
    m = np.abs(a) > 1e-6 * np.max(np.abs(a))
    ratio = b[m] / a[m]
    assert np.allclose(ratio, ratio[0], rtol=1e-9)
    assert pulse_power(scaled, t) == pytest.approx(power, rel=1e-12)


def test_power_spectrum():
    t = time_grid(1.0, 1024)
    cos = Pulse(PulseBasis(np.array([2 * np.pi * 5]), 1.0), [0.0, 2.0])
    omega, phi = pulse_power_spectrum(cos, t)
    assert omega[np.argmax(phi)] == pytest.approx(2 * np.pi * 5)
    pulse = _random_pulse(2)
    omega, phi = pulse_power_spectrum(pulse, t)
    parseval = np.sum(phi) * (omega[1] - omega[0]) / (2 * np.pi)
    assert parseval == pytest.approx(pulse_power(pulse, t), rel=0.02)
    _, phi0 = pulse_power_spectrum(Pulse.zero(1.0), t)
    assert np.all(phi0 == 0)


def _in_band_fraction(pulse, lo, hi, k, t):
    omega, phi = pulse_power_spectrum(pulse, t)
    m = (omega >= lo - k * 2 * np.pi) & (omega <= hi + k * 2 * np.pi)
    return np.sum(phi[m]) / np.sum(phi)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_bandwidth_containment_on_comb(seed):
    # harmonics of 2pi/T are orthogonal on [0, T]: no leakage at all
    rng = np.random.default_rng(seed)
    k = np.sort(rng.choice(np.arange(1, 40), size=3, replace=False))
    basis = PulseBasis(2 * np.pi * k, 1.0)
    pulse = Pulse(basis, rng.standard_normal(basis.size))
    t = time_grid(1.0, 1024)
    assert _in_band_fraction(pulse, 2 * np.pi * k[0], 2 * np.pi * k[-1], 1, t) >= 0.99


def test_bandwidth_containment_random_frequencies():
    # off-comb tones leak as sinc^2 on [0, T]; the main lobe holds ~90%
    t = time_grid(1.0, 4096)
    near, far = [], []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        lo, hi = sorted(rng.uniform(0, 2 * np.pi * 20, 2))
        hi = max(hi, lo + 1.0)
        basis = random_basis(rng, 3, (lo, hi), 1.0)
        pulse = Pulse(basis, rng.standard_normal(basis.size))
        near.append(_in_band_fraction(pulse, lo, hi, 1, t))
        far.append(_in_band_fraction(pulse, lo, hi, 10, t))
    assert np.median(near) >= 0.90
    assert np.mean(far) >= 0.98


def test_modulation_functions():
    t = time_grid(1.0, 1000)
    y, z = modulation_functions(Pulse.zero(1.0), t)
    assert np.all(y == 1) and np.all(z == 0)
    wx = 2 * np.pi * 3
    y, z = modulation_functions(Pulse.constant(wx, 1.0), t)
    assert np.arctan2(z[-1], y[-1]) == pytest.approx(np.angle(np.exp(1j * wx)), abs=1e-12)
    pulse = _random_pulse(4)
    y, z = modulation_functions(pulse, t)
    assert np.allclose(y**2 + z**2, 1.0, atol=1e-15)
    # refined-grid trapezoid oracle for theta
    fine = np.linspace(0, 1, 200_001)
    f = pulse.sample(fine)
    theta_ref = np.concatenate([[0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(fine))])
    theta = np.unwrap(np.arctan2(z, y))
    assert np.allclose(theta, theta_ref[::200], atol=1e-6)


def test_degrees_of_freedom():
    assert degrees_of_freedom(2 * np.pi * 10, 1.0) == pytest.approx(10)
    assert bandwidth_for_dof(20, 1.0) == pytest.approx(2 * np.pi * 20)
