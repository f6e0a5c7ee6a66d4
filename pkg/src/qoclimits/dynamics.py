"""Time evolution of a driven qubit (or small n-level system).

Two routes are provided:

* :func:`evolve_master` integrates ``drho/dt = -i[H_d + f(t) H_c, rho] + L(rho)``
  for a white-noise dissipator ``L``;
* :func:`evolve_trajectory` integrates the Schroedinger equation with
  ``H(t) = H_d + f(t) H_c + xi(t) H_n`` for one noise trace, and
  :func:`ensemble_average` averages the projectors over many traces.

Both use fixed-step RK4 (4096 steps over the horizon by default). Pulses are
evaluated exactly at the RK4 stage times; noise samples are held constant
within a step.

Dephasing convention: ``Dephasing(gamma)`` damps coherences as
``d rho_01/dt = (coherent part) - gamma * rho_01``, i.e. ``gamma`` is the
coherence decay rate of the pure-dephasing channel.
"""

from __future__ import annotations

import csv
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from qoclimits import _kernels
from qoclimits.linalg import (
    DensityMatrix,
    InvariantViolation,
    PureState,
    as_operator,
    control_error,
    is_hermitian,
    pauli,
)
from qoclimits.noise import NoiseRealization, time_grid
from qoclimits.pulses import Pulse, mean_power

DEFAULT_STEPS = 4096


@dataclass(frozen=True)
class ControlProblem:
    drift: np.ndarray
    control_op: np.ndarray
    noise_op: np.ndarray
    initial: DensityMatrix
    target: DensityMatrix
    T: float = 1.0
    n_steps: int = DEFAULT_STEPS
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = {}
        for name in ("drift", "control_op", "noise_op"):
            m = as_operator(getattr(self, name), name).copy()
            if not is_hermitian(m):
                raise ValueError(f"{name} is not Hermitian")
            m.setflags(write=False)
            ops[name] = m
            object.__setattr__(self, name, m)
        dims = {m.shape[0] for m in ops.values()} | {self.initial.dim, self.target.dim}
        if len(dims) != 1:
            raise ValueError(f"operators and states have inconsistent dimensions {sorted(dims)}")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError("horizon T must be positive and finite")
        if int(self.n_steps) < 1:
            raise ValueError("need at least one step (two grid points)")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def grid(self) -> np.ndarray:
        return time_grid(self.T, self.n_steps)

    @property
    def half_grid(self) -> np.ndarray:
        return time_grid(self.T, 2 * self.n_steps)

    def with_states(self, initial: DensityMatrix, target: DensityMatrix) -> "ControlProblem":
        return ControlProblem(
            self.drift, self.control_op, self.noise_op, initial, target, self.T, self.n_steps
        )

    def with_steps(self, n_steps: int) -> "ControlProblem":
        return ControlProblem(
            self.drift, self.control_op, self.noise_op, self.initial, self.target, self.T, n_steps
        )

    def with_drift(self, drift) -> "ControlProblem":
        return ControlProblem(
            drift, self.control_op, self.noise_op, self.initial, self.target, self.T, self.n_steps
        )


def qubit_hamiltonian(name: str, omega_y: float = 0.0, omega_z: float = 0.0):
    """Drift, control and noise operators of the named qubit model.

    ``h1``: ``f sx + wy sy + wz sz`` (noise on ``sz``, handled by a dissipator)
    ``h2``: ``f sx + wz sz`` (decay channel)
    ``h3``: ``f sx + xi sz``
    ``h4``: ``f sx + wy sy + (wz + xi) sz``
    """
    sx, sy, sz = pauli("x"), pauli("y"), pauli("z")
    name = name.lower()
    if name == "h1":
        drift = omega_y * sy + omega_z * sz
    elif name == "h2":
        drift = omega_z * sz
    elif name == "h3":
        drift = np.zeros((2, 2), dtype=complex)
    elif name == "h4":
        drift = omega_y * sy + omega_z * sz
    else:
        raise ValueError(f"unknown Hamiltonian {name!r}")
    return drift, sx, sz


# ---------------------------------------------------------------- dissipators


def _lindblad_superop(a: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A rho B) = (A kron B^T) vec(rho)
    n = a.shape[0]
    eye = np.eye(n)
    ada = a.conj().T @ a
    return np.kron(a, a.conj()) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T)


@dataclass(frozen=True)
class Dephasing:
    """Every coherence ``rho_jk`` (``j != k``) decays at rate ``gamma``."""

    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    def superoperator(self, dim: int) -> np.ndarray:
        mask = 1.0 - np.eye(dim)
        return -self.gamma * np.diag(mask.ravel()).astype(complex)


@dataclass(frozen=True)
class Decay:
    """Amplitude damping ``gamma (a rho a+ - {a+ a, rho}/2)`` towards level 0."""

    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    def superoperator(self, dim: int) -> np.ndarray:
        a = np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)
        return self.gamma * _lindblad_superop(a)


def gamma_for_snr(snr: float, T: float, signal_power: float | None = None) -> float:
    """Dephasing rate giving the requested S/N under noise power ``2 gamma T P_f``.

    The noise is modelled as a frequency instability proportional to the pulse
    strength, so the noise power scales with the signal power and the rate is
    ``gamma = 1 / (2 T S/N)`` whatever ``P_f`` is.
    """
    if snr <= 0:
        raise ValueError("S/N must be positive")
    p = 1.0 if signal_power is None or signal_power <= 0 else signal_power
    noise_power = p / snr
    return noise_power / (2.0 * T * p)


@dataclass(frozen=True)
class SnrLockedDephasing:
    """Dephasing whose rate is recomputed from each candidate pulse's power."""

    snr: float

    def resolve(self, T: float, signal_power: float) -> Dephasing:
        return Dephasing(gamma_for_snr(self.snr, T, signal_power))


# ------------------------------------------------------------------- helpers


def _commutator_superop(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


@lru_cache(maxsize=None)
def hermitian_basis(n: int) -> np.ndarray:
    """Columns are ``vec(E_k)`` for an orthonormal Hermitian operator basis.

    Any Hermiticity-preserving superoperator ``L`` becomes the real matrix
    ``B^H L B`` in this basis and density matrices have real coordinates.
    """
    cols = []
    for j in range(n):
        e = np.zeros((n, n), complex)
        e[j, j] = 1.0
        cols.append(e)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), complex)
            e[j, k] = e[k, j] = 1 / np.sqrt(2)
            cols.append(e)
            e = np.zeros((n, n), complex)
            e[j, k] = -1j / np.sqrt(2)
            e[k, j] = 1j / np.sqrt(2)
            cols.append(e)
    return np.stack([c.ravel() for c in cols], axis=1)


def _to_real(b: np.ndarray, sup: np.ndarray) -> np.ndarray:
    r = b.conj().T @ sup @ b
    if np.max(np.abs(r.imag)) > 1e-9 * max(1.0, np.max(np.abs(r.real))):
        raise InvariantViolation("superoperator does not preserve Hermiticity")
    return np.ascontiguousarray(r.real)


def _liouvillians(problem: ControlProblem, dissipator) -> tuple[np.ndarray, np.ndarray]:
    """Real drift and control generators in the basis of :func:`hermitian_basis`."""
    key = ("liouv", dissipator)
    cache = problem._cache
    if key not in cache:
        b = hermitian_basis(problem.dim)
        l0 = _commutator_superop(problem.drift)
        if dissipator is not None:
            l0 = l0 + dissipator.superoperator(problem.dim)
        l1 = _commutator_superop(problem.control_op)
        cache[key] = (_to_real(b, l0), _to_real(b, l1))
    return cache[key]


def sample_half_grid(problem: ControlProblem, pulse) -> np.ndarray:
    """Pulse values at every RK4 stage time, or pass through pre-sampled values."""
    if isinstance(pulse, Pulse):
        if not np.isclose(pulse.T, problem.T):
            raise ValueError(f"pulse horizon {pulse.T} differs from problem horizon {problem.T}")
        return pulse.sample(problem.half_grid)
    f = np.asarray(pulse, dtype=float)
    if f.shape != (2 * problem.n_steps + 1,):
        raise ValueError("pre-sampled pulse must live on the half-step grid")
    return f


def _check_state(rho: np.ndarray, where: str) -> DensityMatrix:
    try:
        return DensityMatrix(rho)
    except InvariantViolation as exc:
        raise InvariantViolation(f"{exc} {where}; try a smaller time step") from None


# ---------------------------------------------------------------- integrators


def evolve_master(problem: ControlProblem, pulse, dissipator=None, record: bool = False):
    """Final state of the master equation; with ``record`` also every step's state.

    ``dissipator`` is ``Dephasing``, ``Decay``, ``SnrLockedDephasing`` or None.
    """
    f_half = sample_half_grid(problem, pulse)
    if isinstance(dissipator, SnrLockedDephasing):
        dissipator = dissipator.resolve(problem.T, mean_power(f_half[::2], problem.grid))
    l0, l1 = _liouvillians(problem, dissipator)
    b = hermitian_basis(problem.dim)
    v0 = np.ascontiguousarray((b.conj().T @ problem.initial.matrix.ravel()).real)
    path = _kernels.rk4_linear(l0, l1, f_half, v0, problem.dt, record)
    n = problem.dim
    rhos = (path @ b.T).reshape(-1, n, n)
    final = _check_state(rhos[-1], "after master-equation integration")
    if record:
        return final, rhos
    return final


def _initial_vector(problem: ControlProblem) -> np.ndarray:
    rho = problem.initial.matrix
    w, v = np.linalg.eigh(rho)
    if w[-1] < 1 - 1e-9:
        raise ValueError("trajectory integration needs a pure initial state")
    return np.ascontiguousarray(v[:, -1])


def _propagate(problem, f_half, xi, record=False):
    h = [np.ascontiguousarray(-1j * m) for m in (problem.drift, problem.control_op, problem.noise_op)]
    psi0 = _initial_vector(problem)
    kernel = _kernels.rk4_qubit if problem.dim == 2 else _kernels.rk4_schrodinger
    finals, path, drift = kernel(
        h[0], h[1], h[2], f_half, np.ascontiguousarray(xi, dtype=float), psi0, problem.dt, record
    )
    if drift > 1e-8:
        raise InvariantViolation(
            f"norm drift {drift:.2e} per step exceeds 1e-8; try a smaller time step"
        )
    return finals, path


def evolve_trajectory(problem: ControlProblem, pulse, realization: NoiseRealization | None, record=False):
    """Final pure state for one noise trace (``None`` means no noise)."""
    f_half = sample_half_grid(problem, pulse)
    if realization is None:
        xi = np.zeros((1, problem.n_steps + 1))
    else:
        if realization.samples.size != problem.n_steps + 1 or not np.isclose(
            realization.dt, problem.dt, rtol=1e-9
        ):
            raise ValueError("noise realisation grid does not match the problem grid")
        xi = realization.samples[None, :]
    finals, path = _propagate(problem, f_half, xi, record)
    state = PureState.normalized(finals[0])
    if record:
        return state, path
    return state


def realization_matrix(problem: ControlProblem, model, n_real: int, base_seed: int) -> np.ndarray:
    """Noise traces for seeds ``base_seed + k`` stacked as ``(n_real, n_steps + 1)``."""
    if n_real < 1:
        raise ValueError("need at least one realisation")
    t = problem.grid
    return np.stack([model.sample(t, base_seed + k).samples for k in range(n_real)])


def average_projector(finals: np.ndarray) -> np.ndarray:
    # ordered summation keeps the result bit-stable for a fixed seed
    rho = np.zeros((finals.shape[1], finals.shape[1]), dtype=complex)
    for psi in finals:
        psi = psi / np.linalg.norm(psi)
        rho += np.outer(psi, psi.conj())
    return rho / finals.shape[0]


def ensemble_state(problem: ControlProblem, pulse, xi: np.ndarray) -> DensityMatrix:
    f_half = sample_half_grid(problem, pulse)
    finals, _ = _propagate(problem, f_half, xi)
    return _check_state(average_projector(finals), "after ensemble averaging")


def ensemble_average(problem: ControlProblem, pulse, model, n_real: int, base_seed: int):
    """Average of trajectory projectors and its control error against the target."""
    xi = realization_matrix(problem, model, n_real, base_seed)
    rho = ensemble_state(problem, pulse, xi)
    return rho, control_error(problem.target, rho)


def survival_infidelity(target: DensityMatrix, state: DensityMatrix) -> float:
    """``1 - Tr(target state)``: one minus the overlap probability.

    For a pure target this is ``1 - F**2`` with ``F`` the Uhlmann fidelity.
    """
    return float(1.0 - np.real(np.trace(target.matrix @ state.matrix)))


def write_trajectory_csv(path, t, states) -> None:
    """Debug dump of a recorded trajectory: ``t, re0, im0, re1, im1, ...``."""
    states = np.asarray(states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t"]
        for j in range(states.shape[1]):
            header += [f"re{j}", f"im{j}"]
        w.writerow(header)
        for ti, psi in zip(t, states):
            row = [repr(float(ti))]
            for a in psi:
                row += [repr(float(a.real)), repr(float(a.imag))]
            w.writerow(row)
