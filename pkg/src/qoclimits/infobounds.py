"""Signal-to-noise ratio, channel capacities and the error/time bounds they imply.

The capacity formulas take the bandwidth literally: ``C = B log2(1 + S/N)``
is in bits per unit time when ``B`` is in cycles per unit time. Bandwidths
elsewhere in the package are angular (rad/time), and degrees of freedom are
``D = bandwidth * T / (2pi)`` (see :func:`qoclimits.pulses.degrees_of_freedom`).
The bound helpers and :class:`BoundReport` therefore divide angular
bandwidths (and integrals over ``d omega``) by ``2pi``, which makes the
white-noise information content ``I_f = C T = D log2(1 + S/N)``. This is the
one place where that factor is handled.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from qoclimits.spectra import SpectralDensity

QUBIT_MIXED_DW = 3


def snr(signal_power: float, noise_power: float) -> float:
    if noise_power <= 0:
        raise ValueError("noise power must be positive; use the noiseless (Hartley) bound instead")
    if signal_power < 0:
        raise ValueError("signal power must be >= 0")
    return signal_power / noise_power


def hartley_capacity(bandwidth: float, dynamic_range: float, resolution: float) -> float:
    """Noiseless capacity ``bandwidth * log2(1 + dynamic_range / resolution)``."""
    if bandwidth <= 0 or dynamic_range <= 0 or resolution <= 0:
        raise ValueError("bandwidth, dynamic range and resolution must be positive")
    return bandwidth * np.log2(1.0 + dynamic_range / resolution)


def shannon_hartley_capacity(bandwidth: float, snr_value: float) -> float:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if snr_value < 0:
        raise ValueError("S/N must be >= 0")
    return bandwidth * np.log2(1.0 + snr_value)


def colored_capacity(phi_f: SpectralDensity, phi_xi: SpectralDensity, band) -> float:
    """``int_band log2(1 + phi_f / phi_xi) dw`` by adaptive quadrature (rtol 1e-10)."""
    lo, hi = float(band[0]), float(band[1])
    if not hi > lo:
        raise ValueError(f"invalid band {band}")
    probe = np.linspace(lo, hi, 2049)
    if np.any(np.asarray(phi_xi(probe)) <= 0):
        raise ValueError("noise spectral density vanishes inside the band")

    def integrand(w):
        return np.log2(1.0 + float(phi_f(np.array([w]))[0]) / float(phi_xi(np.array([w]))[0]))

    val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=500)
    return float(val)


def information_content(capacity: float, T: float) -> float:
    return capacity * T


def error_lower_bound(info_bits: float, d_w: int = QUBIT_MIXED_DW) -> float:
    """``2**(-I_f / D_W)`` clamped to ``[0, 1]``."""
    if info_bits < 0:
        raise ValueError("information content must be >= 0")
    if d_w < 1:
        raise ValueError("D_W must be >= 1")
    return float(min(1.0, max(0.0, 2.0 ** (-info_bits / d_w))))


def white_noise_error_bound(snr_value: float, d: float, d_w: int = QUBIT_MIXED_DW) -> float:
    """``(1 + S/N) ** (-D / D_W)``, the white-noise composition of the two laws above."""
    return error_lower_bound(d * np.log2(1.0 + snr_value), d_w)


def noiseless_error_bound(resolution_ratio: float, d: float, d_w: int = QUBIT_MIXED_DW) -> float:
    return error_lower_bound(d * np.log2(1.0 + resolution_ratio), d_w)


def colored_error_bound(phi_f, phi_xi, band, T: float, d_w: int = QUBIT_MIXED_DW) -> float:
    """Colored-noise error bound with ``band`` in rad/time."""
    info = T * colored_capacity(phi_f, phi_xi, band) / (2 * np.pi)
    return error_lower_bound(info, d_w)


def time_lower_bound(epsilon: float, capacity: float, d_w: int = QUBIT_MIXED_DW) -> float:
    """``-(D_W / C) log2(epsilon)``."""
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    return float(-(d_w / capacity) * np.log2(epsilon))


def gronwall_error_bound(norm_hp_sq: float, norm_hs_sq: float, integral_norm_hs: float) -> float:
    """Small-noise bound ``(1/2)(|Hp|^2/|Hs|^2)(exp(int |Hs| dt) - 1)^2``."""
    if norm_hp_sq < 0 or integral_norm_hs < 0:
        raise ValueError("norms must be non-negative")
    if norm_hs_sq <= 0:
        raise ValueError("system Hamiltonian norm must be positive")
    return 0.5 * norm_hp_sq / norm_hs_sq * np.expm1(integral_norm_hs) ** 2


def gronwall_inputs(problem, pulse, realization) -> tuple[float, float, float]:
    """Norm arguments of :func:`gronwall_error_bound` for a concrete trajectory pair.

    Norms are time maxima of the spectral norm on the grid; the integral of
    ``|H_s(t)|`` uses the trapezoid rule.
    """
    t = problem.grid
    f = pulse.sample(t)
    hs = problem.drift[None] + f[:, None, None] * problem.control_op[None]
    hs_norm = np.linalg.norm(hs, ord=2, axis=(1, 2))
    hn = np.linalg.norm(problem.noise_op, ord=2)
    hp_norm = np.abs(realization.samples) * hn
    return float(np.max(hp_norm) ** 2), float(np.max(hs_norm) ** 2), float(np.trapezoid(hs_norm, t))


@dataclass
class BoundReport:
    snr: float
    capacity: float
    info_content: float
    error_lower_bound: float
    time_lower_bound: float
    d_w: int
    d: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "\n".join(f"{k}={v!r}" for k, v in self.as_dict().items()) + "\n"


def white_noise_report(
    signal_power: float,
    noise_power: float,
    bandwidth: float,
    T: float,
    d_w: int = QUBIT_MIXED_DW,
    epsilon: float | None = None,
) -> BoundReport:
    """Bounds for a white-noise channel with angular ``bandwidth``.

    ``epsilon`` (default: the error bound itself) sets the time bound.
    """
    r = snr(signal_power, noise_power)
    cap = shannon_hartley_capacity(bandwidth / (2 * np.pi), r)
    info = information_content(cap, T)
    d = bandwidth * T / (2 * np.pi)
    eps_lb = white_noise_error_bound(r, d, d_w)
    eps = eps_lb if epsilon is None else epsilon
    t_lb = time_lower_bound(eps, cap, d_w) if cap > 0 and eps > 0 else 0.0
    return BoundReport(r, cap, info, eps_lb, t_lb, d_w, d)
