"""Spectral densities as callables of angular frequency.

All densities here are one-sided: power per unit angular frequency on
``omega >= 0`` normalised so that ``(1/2pi) * integral_0^inf S dw`` is the
mean signal power. The two-sided density of the autocorrelation Fourier
transform is half of this on each side of zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SpectralDensity:
    """Base class. Subclasses evaluate non-negative values on arrays of omega."""

    def __call__(self, omega):
        raise NotImplementedError

    def power(self, omega_min: float = 0.0, omega_max: float = np.inf) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class FlatSpectrum(SpectralDensity):
    level: float

    def __post_init__(self):
        if not np.isfinite(self.level) or self.level < 0:
            raise ValueError(f"flat level must be finite and >= 0, got {self.level}")

    def __call__(self, omega):
        return np.full(np.shape(omega), float(self.level))

    def power(self, omega_min=0.0, omega_max=np.inf):
        return self.level * (omega_max - omega_min) / (2 * np.pi)


@dataclass(frozen=True)
class PowerLawSpectrum(SpectralDensity):
    """``c / omega**alpha`` on ``[omega_min, omega_max]``, zero outside."""

    c: float
    alpha: float
    omega_min: float = 0.0
    omega_max: float = np.inf

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("power-law prefactor must be >= 0")
        if self.omega_min < 0 or self.omega_max <= self.omega_min:
            raise ValueError("need 0 <= omega_min < omega_max")

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        out = np.zeros(w.shape)
        inside = (w >= self.omega_min) & (w <= self.omega_max) & (w > 0)
        out[inside] = self.c * w[inside] ** (-self.alpha)
        return out

    def power(self, omega_min=0.0, omega_max=np.inf):
        lo = max(omega_min, self.omega_min)
        hi = min(omega_max, self.omega_max)
        if hi <= lo:
            return 0.0
        if lo == 0.0 and self.alpha >= 1:
            return np.inf
        if np.isclose(self.alpha, 1.0):
            integral = np.log(hi / lo)
        else:
            integral = (hi ** (1 - self.alpha) - lo ** (1 - self.alpha)) / (1 - self.alpha)
        return self.c * integral / (2 * np.pi)

    @classmethod
    def with_power(cls, power, alpha, omega_min, omega_max) -> "PowerLawSpectrum":
        unit = cls(1.0, alpha, omega_min, omega_max).power()
        return cls(power / unit, alpha, omega_min, omega_max)


@dataclass(frozen=True)
class SampledSpectrum(SpectralDensity):
    """Piecewise-linear interpolation of sampled values, zero outside the samples."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.shape != v.shape or w.ndim != 1 or w.size < 2:
            raise ValueError("need matching 1-d omega/value arrays with >= 2 samples")
        if np.any(np.diff(w) <= 0):
            raise ValueError("omega samples must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("spectral values must be finite and non-negative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    def __call__(self, omega):
        return np.interp(omega, self.omega, self.values, left=0.0, right=0.0)

    def power(self, omega_min=0.0, omega_max=np.inf):
        m = (self.omega >= omega_min) & (self.omega <= omega_max)
        if m.sum() < 2:
            return 0.0
        return float(np.trapezoid(self.values[m], self.omega[m])) / (2 * np.pi)


@dataclass(frozen=True)
class LineSpectrum(SpectralDensity):
    """Discrete lines: ``S(w) = sum_k weight_k * delta(w - w_k)``.

    ``weight_k`` is ``2pi`` times the mean power carried by line ``k``.
    Calling the object returns a smoothed density (weight over local line
    spacing) so that it can stand in where a continuous density is needed.
    """

    frequencies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.weights, dtype=float)
        if w.shape != p.shape or w.ndim != 1 or w.size < 1:
            raise ValueError("need matching 1-d frequency/weight arrays")
        if np.any(np.diff(w) <= 0):
            raise ValueError("line frequencies must be strictly increasing")
        if np.any(p < 0):
            raise ValueError("line weights must be non-negative")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "weights", p)

    @classmethod
    def from_powers(cls, frequencies, powers) -> "LineSpectrum":
        return cls(np.asarray(frequencies, float), 2 * np.pi * np.asarray(powers, float))

    def spacing(self) -> np.ndarray:
        if self.frequencies.size == 1:
            return np.ones(1)
        return np.gradient(self.frequencies)

    def __call__(self, omega):
        dens = self.weights / self.spacing()
        if self.frequencies.size == 1:
            return np.where(np.isclose(omega, self.frequencies[0]), dens[0], 0.0)
        return np.interp(omega, self.frequencies, dens, left=0.0, right=0.0)

    def power(self, omega_min=0.0, omega_max=np.inf):
        m = (self.frequencies >= omega_min) & (self.frequencies <= omega_max)
        return float(self.weights[m].sum()) / (2 * np.pi)

    def scaled(self, factor: float) -> "LineSpectrum":
        return LineSpectrum(self.frequencies, self.weights * factor)
