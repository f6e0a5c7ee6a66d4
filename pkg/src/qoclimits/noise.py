"""Stochastic noise fields on a uniform time grid.

White noise uses the discrete-delta convention: samples held constant over a
step of length ``dt`` have variance ``2*gamma/dt``, so that the integrated
correlation reproduces ``2*gamma*delta(t - t')``.

Power-law noise is a superposition of harmonics ``w_k = 2pi k / T`` inside
``[omega_min, omega_max]`` with amplitudes ``w_k**(-alpha/2)`` and uniform
random phases. The realisation is rescaled so that its integrated power is
exactly ``power * T``; the harmonics are orthogonal on the grid, so every
realisation carries the same line powers and only the phases are random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qoclimits.spectra import FlatSpectrum, LineSpectrum, PowerLawSpectrum

DEFAULT_REALIZATIONS = 20
DEFAULT_OMEGA_MAX = 2 * np.pi * 128


def time_grid(T: float, n_steps: int) -> np.ndarray:
    if T <= 0 or not np.isfinite(T):
        raise ValueError(f"horizon must be positive and finite, got {T}")
    if n_steps < 1:
        raise ValueError("need at least one step")
    return np.linspace(0.0, T, int(n_steps) + 1)


def grid_step(t) -> float:
    """Return the spacing of a uniform grid, raising if it is not uniform."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid needs at least two points")
    d = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if dt <= 0 or np.max(np.abs(d - dt)) > 1e-9 * max(dt, 1e-300) + 1e-12 * abs(t[-1]):
        raise ValueError("time grid must be uniform and increasing")
    return float(dt)


@dataclass(frozen=True)
class WhiteNoise:
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    def spectrum(self) -> FlatSpectrum:
        # two-sided level 2*gamma, doubled for the one-sided convention
        return FlatSpectrum(4.0 * self.gamma)

    def sample(self, t, seed) -> "NoiseRealization":
        return sample_white(self.gamma, t, seed)


@dataclass(frozen=True)
class PowerLawNoise:
    """``1/omega**alpha`` noise with fixed mean power ``(1/T) int xi^2 dt``.

    ``omega_min`` defaults to ``2pi/T``; ``omega_max`` defaults to
    ``2pi*128`` clipped to the grid's Nyquist frequency.
    """

    alpha: float
    power: float
    omega_min: float | None = None
    omega_max: float | None = None

    def __post_init__(self):
        if not (0 < self.alpha <= 4):
            raise ValueError(f"alpha must lie in (0, 4], got {self.alpha}")
        if not np.isfinite(self.power) or self.power < 0:
            raise ValueError(f"power must be finite and >= 0, got {self.power}")
        if self.omega_min is not None and self.omega_min <= 0:
            raise ValueError("omega_min must be positive")
        if (
            self.omega_min is not None
            and self.omega_max is not None
            and self.omega_max <= self.omega_min
        ):
            raise ValueError("need omega_min < omega_max")

    def band(self, T: float, dt: float) -> tuple[float, float]:
        lo = 2 * np.pi / T if self.omega_min is None else self.omega_min
        nyquist = np.pi / dt
        if self.omega_max is None:
            hi = min(DEFAULT_OMEGA_MAX, nyquist)
        else:
            hi = self.omega_max
            if hi > nyquist * (1 + 1e-12):
                raise ValueError(
                    f"omega_max={hi:.6g} exceeds the grid's resolvable frequency {nyquist:.6g}"
                )
        if hi <= lo:
            raise ValueError("empty frequency band")
        return lo, hi

    def harmonics(self, T: float, dt: float) -> np.ndarray:
        """Harmonic indices ``k`` (frequency ``2pi k/T``) present in the synthesis."""
        lo, hi = self.band(T, dt)
        n_steps = int(round(T / dt))
        eps = 1e-9
        k_lo = max(int(np.ceil(lo * T / (2 * np.pi) - eps)), 1)
        k_hi = min(int(np.floor(hi * T / (2 * np.pi) + eps)), (n_steps - 1) // 2)
        if k_hi < k_lo:
            raise ValueError("no harmonic of 2pi/T falls inside the noise band")
        return np.arange(k_lo, k_hi + 1)

    def line_spectrum(self, T: float, dt: float) -> LineSpectrum:
        """Exact one-sided line spectrum carried by every realisation."""
        k = self.harmonics(T, dt)
        w = 2 * np.pi * k / T
        amp2 = w ** (-self.alpha)
        powers = self.power * amp2 / amp2.sum()
        return LineSpectrum.from_powers(w, powers)

    def spectrum(self, T: float, dt: float) -> PowerLawSpectrum:
        """Continuous power-law density with the same band and power."""
        k = self.harmonics(T, dt)
        dw = 2 * np.pi / T
        lo = 2 * np.pi * k[0] / T - dw / 2
        hi = 2 * np.pi * k[-1] / T + dw / 2
        return PowerLawSpectrum.with_power(self.power, self.alpha, lo, hi)

    def sample(self, t, seed) -> "NoiseRealization":
        return sample_power_law(self, t, seed)


@dataclass(frozen=True)
class NoiseRealization:
    """One noise trace. ``samples[i]`` holds over ``[t_i, t_i + dt)``."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).copy()
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a realisation needs at least two samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("noise samples must be finite")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def n_steps(self) -> int:
        return self.samples.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    def integrated_power(self) -> float:
        """``sum xi_i^2 dt`` over the held steps (the last grid point is not held)."""
        return float(np.sum(self.samples[:-1] ** 2) * self.dt)


def sample_white(gamma: float, t, seed: int) -> NoiseRealization:
    dt = grid_step(t)
    WhiteNoise(gamma)
    rng = np.random.default_rng(seed)
    n = len(t)
    if gamma == 0:
        return NoiseRealization(np.zeros(n), dt)
    return NoiseRealization(rng.standard_normal(n) * np.sqrt(2.0 * gamma / dt), dt)


def sample_power_law(model: PowerLawNoise, t, seed: int) -> NoiseRealization:
    dt = grid_step(t)
    n_steps = len(t) - 1
    T = n_steps * dt
    k = model.harmonics(T, dt)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=k.size)
    if model.power == 0:
        return NoiseRealization(np.zeros(n_steps + 1), dt)
    amp = (2 * np.pi * k / T) ** (-model.alpha / 2)
    spec = np.zeros(n_steps // 2 + 1, dtype=complex)
    spec[k] = 0.5 * n_steps * amp * np.exp(1j * phases)
    x = np.fft.irfft(spec, n=n_steps)
    x = np.append(x, x[0])  # periodic on [0, T]
    scale = np.sqrt(model.power * T / (np.sum(x[:-1] ** 2) * dt))
    return NoiseRealization(x * scale, dt)


def periodogram(samples, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of ``samples`` (held values, one per step)."""
    x = np.asarray(samples, dtype=float)
    n_steps = x.size
    spec = np.abs(np.fft.rfft(x)) ** 2
    weight = np.full(spec.size, 2.0)
    weight[0] = 1.0
    if n_steps % 2 == 0:
        weight[-1] = 1.0
    omega = 2 * np.pi * np.arange(spec.size) / (n_steps * dt)
    return omega, weight * spec * dt / n_steps


def estimate_psd(realizations) -> tuple[np.ndarray, np.ndarray]:
    """Averaged one-sided periodogram of the held samples.

    Satisfies ``sum(phi) * domega / (2pi) == mean power`` exactly for each
    realisation, hence for the average.
    """
    reals = list(realizations)
    if not reals:
        raise ValueError("need at least one realisation")
    n = reals[0].samples.size
    dt = reals[0].dt
    for r in reals[1:]:
        if r.samples.size != n or not np.isclose(r.dt, dt, rtol=1e-12, atol=0):
            raise ValueError("realisations are on different grids")
    acc = None
    for r in reals:
        omega, phi = periodogram(r.samples[:-1], dt)
        acc = phi if acc is None else acc + phi
    return omega, acc / len(reals)


def pure_cosine(omega: float, t, amplitude: float = 1.0) -> NoiseRealization:
    """Deterministic cosine trace, handy as a spectral test signal."""
    t = np.asarray(t, dtype=float)
    return NoiseRealization(amplitude * np.cos(omega * t), grid_step(t))
