"""Kofman-Kurizki decoherence estimates from the pulse filter function.

The filter function is ``F(w) = (4/pi)(|Y(w)|^2 + |Z(w)|^2)`` with ``Y`` and
``Z`` the finite-time Fourier transforms of the modulation functions
``cos(theta)`` and ``sin(theta)``, and the decoherence function is
``chi = int_0^inf F(w) phi(w) dw``.

Conventions for a qubit ``H = f(t) sigma_x + xi(t) sigma_z`` prepared in an
eigenstate of ``sigma_x``:

* the Bloch vector turns by ``theta = 2 int f``, so :func:`kk_error_estimate`
  builds the filter with ``phase_scale=2``;
* first-order perturbation theory gives ``1 - p = (1/pi) int_0^inf G(w)
  (|Y|^2 + |Z|^2) dw / 2`` for the one-sided noise density ``G`` used
  throughout the package, so the density entering ``chi = int F phi`` is
  ``phi = G / 4``. With that choice ``p = (1 + exp(-chi)) / 2`` holds to
  first order and ``eps = 1 - p ~ chi / 2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from qoclimits.noise import grid_step
from qoclimits.pulses import Pulse, modulation_functions
from qoclimits.spectra import LineSpectrum, SpectralDensity

ONE_SIDED_TO_KK = 0.25
N_OMEGA = 4096


@dataclass(frozen=True)
class FilterFunction:
    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.shape != v.shape or w.ndim != 1 or w.size < 1:
            raise ValueError("filter needs matching 1-d arrays")
        if np.any(np.diff(w) <= 0):
            raise ValueError("filter frequency grid must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("filter values must be non-negative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    def centroid(self) -> float:
        """``F``-weighted mean frequency, used as the central frequency ``w_c``."""
        if self.omega.size < 2:
            return float(self.omega[0])
        norm = np.trapezoid(self.values, self.omega)
        if norm <= 0:
            return float("nan")
        return float(np.trapezoid(self.omega * self.values, self.omega) / norm)

    def area(self) -> float:
        if self.omega.size < 2:
            return 0.0
        return float(np.trapezoid(self.values, self.omega))


def _fourier_trapezoid(y: np.ndarray, t: np.ndarray, omega: np.ndarray, chunk: int = 256) -> np.ndarray:
    dt = grid_step(t)
    wts = np.full(t.size, dt)
    wts[0] = wts[-1] = dt / 2
    yw = y * wts
    out = np.empty(omega.size, dtype=complex)
    for s in range(0, omega.size, chunk):
        w = omega[s : s + chunk]
        out[s : s + chunk] = np.exp(1j * np.outer(w, t)) @ yw
    return out


def default_omega_grid(pulse: Pulse, t, phase_scale: float = 1.0, n: int = N_OMEGA) -> np.ndarray:
    """``[0, 8 max(w_ref T, 2pi) / T]`` with ``n`` points.

    ``w_ref`` is the modulation rate: ``phase_scale`` times the RMS pulse
    amplitude plus the highest basis frequency, which for a constant pulse
    ``w_x`` reduces to ``phase_scale * w_x``.
    """
    t = np.asarray(t, dtype=float)
    T = t[-1] - t[0]
    f = pulse.sample(t)
    rms = np.sqrt(np.trapezoid(f * f, t) / T)
    w_ref = phase_scale * rms + float(np.max(pulse.flatten().basis.frequencies))
    return np.linspace(0.0, 8 * max(w_ref * T, 2 * np.pi) / T, n)


def filter_function(pulse: Pulse, t, omega=None, phase_scale: float = 1.0) -> FilterFunction:
    t = np.asarray(t, dtype=float)
    if omega is None:
        omega = default_omega_grid(pulse, t, phase_scale)
    omega = np.asarray(omega, dtype=float)
    y, z = modulation_functions(pulse, t, phase_scale)
    Y = _fourier_trapezoid(y, t, omega)
    Z = _fourier_trapezoid(z, t, omega)
    return FilterFunction(omega, 4 / np.pi * (np.abs(Y) ** 2 + np.abs(Z) ** 2))


def decoherence_function(filt: FilterFunction, phi: SpectralDensity) -> float:
    """``chi = int F(w) phi(w) dw`` over the filter grid.

    A :class:`LineSpectrum` is summed line by line with ``F`` interpolated at
    the line frequencies.
    """
    if isinstance(phi, LineSpectrum):
        f_at = np.interp(phi.frequencies, filt.omega, filt.values, left=0.0, right=0.0)
        return float(np.sum(f_at * phi.weights))
    vals = np.asarray(phi(filt.omega), dtype=float)
    if filt.omega.size < 2:
        return 0.0
    return float(np.trapezoid(filt.values * vals, filt.omega))


def survival_probability(chi: float) -> float:
    if chi < 0:
        raise ValueError("decoherence function must be >= 0")
    return 0.5 * (1.0 + np.exp(-chi))


@dataclass
class KKReport:
    chi: float
    survival: float
    epsilon: float
    epsilon_narrowband: float
    omega_c: float


def kk_error_estimate(pulse: Pulse, phi_xi: SpectralDensity, t, omega=None, phase_scale: float = 2.0) -> KKReport:
    """Small-noise error ``eps = chi/2`` of holding a ``sigma_x`` eigenstate.

    ``phi_xi`` is the one-sided noise density (as produced by the noise
    module). The narrow-band figure is ``C0 phi(w_c)`` with
    ``C0 = int F dw / 8``, i.e. the same integral with the density frozen at
    the filter centroid.
    """
    t = np.asarray(t, dtype=float)
    if isinstance(phi_xi, LineSpectrum):
        omega = phi_xi.frequencies if omega is None else np.union1d(omega, phi_xi.frequencies)
        broad = filter_function(pulse, t, default_omega_grid(pulse, t, phase_scale), phase_scale)
        filt = filter_function(pulse, t, omega, phase_scale)
        phi = phi_xi.scaled(ONE_SIDED_TO_KK)
    else:
        filt = filter_function(pulse, t, omega, phase_scale)
        broad = filt
        phi = _Scaled(phi_xi, ONE_SIDED_TO_KK)
    chi = decoherence_function(filt, phi)
    if chi > 0.5:
        warnings.warn(f"chi={chi:.3g} is outside the small-noise regime", stacklevel=2)
    omega_c = broad.centroid()
    c0 = broad.area() / 8
    narrow = c0 * float(np.asarray(phi_xi(np.array([omega_c])))[0])
    return KKReport(chi, survival_probability(chi), 0.5 * chi, narrow, omega_c)


def write_filter_csv(path, filt: FilterFunction) -> None:
    with open(path, "w") as fh:
        fh.write("omega,F\n")
        for w, v in zip(filt.omega, filt.values):
            fh.write(f"{w!r},{v!r}\n")


class _Scaled(SpectralDensity):
    def __init__(self, base, factor):
        self.base = base
        self.factor = factor

    def __call__(self, omega):
        return self.factor * np.asarray(self.base(omega), dtype=float)
