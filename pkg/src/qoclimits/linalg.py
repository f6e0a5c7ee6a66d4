"""Small dense operators, qubit states and fidelity measures.

Operators are plain ``numpy`` complex arrays of shape ``(n, n)``. States are
wrapped in light immutable containers that validate themselves on
construction, so that a bad integration result is caught where it happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
NORM_TOL = 1e-12
DET_TOL = 1e-14


class InvariantViolation(ValueError):
    """A state or operator broke one of its numerical invariants."""


def pauli(name: str) -> np.ndarray:
    """Return the Pauli matrix ``"x"``, ``"y"``, ``"z"`` or the identity ``"i"``."""
    table = {
        "i": [[1, 0], [0, 1]],
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
    }
    try:
        return np.array(table[name.lower()], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Pauli matrix {name!r}") from None


def as_operator(a, name: str = "operator") -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def commutator(a, b) -> np.ndarray:
    """Return ``ab - ba``."""
    a = as_operator(a, "a")
    b = as_operator(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_operator(self.matrix, "density matrix").copy()
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise InvariantViolation(f"density matrix not Hermitian (max deviation {dev:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace {tr.real:.12g} differs from 1")
        lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lam_min < -POSITIVITY_TOL:
            raise InvariantViolation(f"density matrix not positive (eigenvalue {lam_min:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        psi = PureState(amplitudes).amplitudes
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, index: int, dim: int = 2) -> "DensityMatrix":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls.from_pure(v)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class PureState:
    """Normalised state vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel().copy()
        if v.size < 1:
            raise ValueError("empty state vector")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > NORM_TOL:
            raise InvariantViolation(f"state norm {nrm:.15g} differs from 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(v / np.linalg.norm(v))

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self.amplitudes)


def _psd_sqrt(h: np.ndarray, what: str) -> np.ndarray:
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    if w[0] < -POSITIVITY_TOL:
        raise InvariantViolation(f"{what} has negative eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _psd_trace_sqrt(h: np.ndarray, what: str) -> float:
    h = 0.5 * (h + h.conj().T)
    w = np.linalg.eigvalsh(h)
    if w[0] < -POSITIVITY_TOL:
        raise InvariantViolation(f"{what} has negative eigenvalue {w[0]:.3e}")
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


def _det2(m: np.ndarray) -> float:
    return float(np.real(m[0, 0] * m[1, 1]) - abs(m[0, 1]) ** 2)


def uhlmann_fidelity(target: DensityMatrix, final: DensityMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(target) final sqrt(target))``.

    This is the root fidelity, so for a pure target it equals
    ``sqrt(<psi|final|psi>)``.
    """
    if target.dim != final.dim:
        raise ValueError(f"dimension mismatch: {target.dim} vs {final.dim}")
    if target.dim == 2:
        # qubit closed form; rounding-level determinants of pure states count as zero
        overlap = float(np.real(np.trace(target.matrix @ final.matrix)))
        dets = [_det2(target.matrix), _det2(final.matrix)]
        dets = [0.0 if d < DET_TOL else d for d in dets]
        fid = np.sqrt(max(overlap + 2.0 * np.sqrt(dets[0] * dets[1]), 0.0))
        return float(min(max(fid, 0.0), 1.0))
    s = _psd_sqrt(target.matrix, "target state")
    inner = s @ final.matrix @ s
    fid = _psd_trace_sqrt(inner, "fidelity inner product")
    return float(min(max(fid, 0.0), 1.0))


def control_error(target: DensityMatrix, final: DensityMatrix) -> float:
    return 1.0 - uhlmann_fidelity(target, final)


def haar_random_state(rng: np.random.Generator, dim: int = 2) -> PureState:
    """Haar-distributed pure state from a normalised complex Gaussian vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState.normalized(v)
