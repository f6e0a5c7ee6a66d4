"""Noisy qubit control: simulation, dCRAB optimisation and information bounds."""

from qoclimits.linalg import (
    DensityMatrix,
    InvariantViolation,
    PureState,
    commutator,
    control_error,
    pauli,
    uhlmann_fidelity,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "InvariantViolation",
    "PureState",
    "commutator",
    "control_error",
    "pauli",
    "uhlmann_fidelity",
]
