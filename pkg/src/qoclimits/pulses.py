"""Control pulses expanded in a randomised trigonometric basis.

A pulse is ``f(t) = c0 * f_prev(t) + sum_i (s_i sin(w_i t) + c_i cos(w_i t))``.
Coefficients are stored interleaved per frequency: ``[s_1, c_1, s_2, c_2, ...]``.
The carry-over term ``c0 * f_prev`` is what dressed CRAB adds between
superiterations; :meth:`Pulse.flatten` folds it into a single flat expansion.

Degrees of freedom follow ``D = bandwidth * T / (2pi)``, the number of
independent Fourier modes that fit in the band over ``[0, T]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from qoclimits.noise import grid_step, periodogram


@dataclass(frozen=True)
class PulseBasis:
    frequencies: np.ndarray
    T: float
    omega_min: float | None = None
    omega_max: float | None = None

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float)).copy()
        if w.size == 0:
            raise ValueError("a pulse basis needs at least one frequency")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        lo = 0.0 if self.omega_min is None else self.omega_min
        hi = np.inf if self.omega_max is None else self.omega_max
        if np.any(w < lo - 1e-12) or np.any(w > hi + 1e-12):
            raise ValueError("basis frequency outside the declared band")
        w.setflags(write=False)
        object.__setattr__(self, "frequencies", w)

    @property
    def size(self) -> int:
        return 2 * self.frequencies.size

    def functions(self, t) -> np.ndarray:
        """Basis functions sampled at ``t``, shape ``(2 * n_freq, len(t))``."""
        t = np.asarray(t, dtype=float)
        arg = np.outer(self.frequencies, t)
        out = np.empty((self.size, t.size))
        out[0::2] = np.sin(arg)
        out[1::2] = np.cos(arg)
        return out

    def antiderivatives(self, t) -> np.ndarray:
        """``int_0^t`` of every basis function, same layout as :meth:`functions`."""
        t = np.asarray(t, dtype=float)
        w = self.frequencies[:, None]
        arg = w * t[None, :]
        out = np.empty((self.size, t.size))
        zero = self.frequencies == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out[0::2] = np.where(zero[:, None], 0.0, (1 - np.cos(arg)) / w)
            out[1::2] = np.where(zero[:, None], t[None, :], np.sin(arg) / w)
        return out


def random_basis(rng: np.random.Generator, n_freq: int, band, T: float) -> PulseBasis:
    """Frequencies drawn uniformly in ``band = (omega_min, omega_max)``."""
    lo, hi = float(band[0]), float(band[1])
    if not (0 <= lo < hi):
        raise ValueError(f"invalid band {band}")
    return PulseBasis(np.sort(rng.uniform(lo, hi, size=n_freq)), T, lo, hi)


def constant_basis(T: float) -> PulseBasis:
    return PulseBasis(np.zeros(1), T)


@dataclass(frozen=True)
class Pulse:
    basis: PulseBasis
    coefficients: np.ndarray
    carryover: tuple["Pulse", float] | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).ravel().copy()
        if c.size != self.basis.size:
            raise ValueError(
                f"expected {self.basis.size} coefficients (sine+cosine per frequency), got {c.size}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("pulse coefficients must be finite")
        if self.carryover is not None:
            prev, c0 = self.carryover
            if not np.isclose(prev.T, self.T):
                raise ValueError("carry-over pulse has a different horizon")
            object.__setattr__(self, "carryover", (prev, float(c0)))
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def T(self) -> float:
        return self.basis.T

    @classmethod
    def constant(cls, value: float, T: float) -> "Pulse":
        return cls(constant_basis(T), np.array([0.0, value]))

    @classmethod
    def zero(cls, T: float) -> "Pulse":
        return cls.constant(0.0, T)

    def sample(self, t) -> np.ndarray:
        """Vectorised evaluation, no range check."""
        t = np.asarray(t, dtype=float)
        out = self.coefficients @ self.basis.functions(t)
        if self.carryover is not None:
            prev, c0 = self.carryover
            out = out + c0 * prev.sample(t)
        return out

    def integral(self, t) -> np.ndarray:
        """``int_0^t f`` in closed form."""
        t = np.asarray(t, dtype=float)
        out = self.coefficients @ self.basis.antiderivatives(t)
        if self.carryover is not None:
            prev, c0 = self.carryover
            out = out + c0 * prev.integral(t)
        return out

    def flatten(self) -> "Pulse":
        """Equivalent pulse with the carry-over folded into one expansion."""
        if self.carryover is None:
            return self
        prev, c0 = self.carryover
        flat = prev.flatten()
        freqs = np.concatenate([flat.basis.frequencies, self.basis.frequencies])
        coeffs = np.concatenate([c0 * flat.coefficients, self.coefficients])
        return Pulse(PulseBasis(freqs, self.T), coeffs)

    def scaled(self, factor: float) -> "Pulse":
        carry = None
        if self.carryover is not None:
            carry = (self.carryover[0], self.carryover[1] * factor)
        return Pulse(self.basis, self.coefficients * factor, carry)

    def to_record(self) -> dict:
        flat = self.flatten()
        return {
            "T": flat.T,
            "frequencies": [float(w) for w in flat.basis.frequencies],
            "coefficients": [float(c) for c in flat.coefficients],
        }

    @classmethod
    def from_record(cls, record: dict) -> "Pulse":
        return cls(PulseBasis(record["frequencies"], record["T"]), record["coefficients"])


@dataclass(frozen=True)
class PowerConstraint:
    """Target mean power ``(1/T) int_0^T f^2 dt``."""

    target_power: float

    def __post_init__(self):
        if not np.isfinite(self.target_power) or self.target_power < 0:
            raise ValueError("target power must be finite and >= 0")

    @classmethod
    def from_energy(cls, energy: float, T: float) -> "PowerConstraint":
        """From the integrated ``int_0^T f^2 dt``."""
        return cls(energy / T)


def evaluate(pulse: Pulse, t: float) -> float:
    if not (-1e-12 <= t <= pulse.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {pulse.T}]")
    return float(pulse.sample(np.array([t]))[0])


def mean_power(values, t) -> float:
    """Trapezoid estimate of ``(1/T) int f^2 dt`` from samples on a uniform grid."""
    t = np.asarray(t, dtype=float)
    grid_step(t)
    v = np.asarray(values, dtype=float)
    return float(np.trapezoid(v * v, t) / (t[-1] - t[0]))


def pulse_power(pulse: Pulse, t) -> float:
    return mean_power(pulse.sample(t), t)


def rescale_to_power(pulse: Pulse, constraint: PowerConstraint, t) -> Pulse:
    """Multiply every coefficient (``c0`` included) by one factor to hit the target power."""
    p = pulse_power(pulse, t)
    if constraint.target_power == 0:
        return pulse.scaled(0.0)
    if p <= 0:
        raise ValueError("cannot rescale an identically zero pulse to a nonzero power")
    return pulse.scaled(np.sqrt(constraint.target_power / p))


def pulse_power_spectrum(pulse: Pulse, t) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of the pulse sampled at the step starts of ``t``."""
    dt = grid_step(t)
    return periodogram(pulse.sample(np.asarray(t)[:-1]), dt)


def modulation_functions(pulse: Pulse, t, phase_scale: float = 1.0):
    """``y = cos(theta)``, ``z = sin(theta)`` with ``theta = phase_scale * int_0^t f``.

    ``phase_scale=1`` is the plain accumulated phase. For a qubit driven as
    ``f(t) sigma_x`` the Bloch vector turns by twice that angle, so the
    filter-function calculator passes ``phase_scale=2``.
    """
    grid_step(t)
    theta = phase_scale * pulse.integral(t)
    return np.cos(theta), np.sin(theta)


def degrees_of_freedom(bandwidth: float, T: float) -> float:
    return bandwidth * T / (2 * np.pi)


def bandwidth_for_dof(d: float, T: float) -> float:
    return 2 * np.pi * d / T


def write_pulse_csv(path, pulse: Pulse, t) -> None:
    values = pulse.sample(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f"])
        for ti, fi in zip(t, values):
            w.writerow([repr(float(ti)), repr(float(fi))])
