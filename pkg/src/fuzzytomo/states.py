"""Pure states, density matrices and small-operator algebra for 1-2 polarization qubits.

Basis ordering is fixed globally: (V, H) for one qubit and (VV, VH, HV, HH)
for two, so index 0 of a state vector is the fully-vertical amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
HERM_TOL = 1e-12
EIG_TOL = 1e-10
UNITARY_TOL = 1e-12


def _as_complex_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("state amplitudes must be a 1-d sequence of length >= 2")
    arr.setflags(write=False)
    return arr


def _as_complex_matrix(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix must be square")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state; amplitudes ordered (V, H) / (VV, VH, HV, HH)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = _as_complex_vector(self.amplitudes)
        norm_sq = float(np.sum(np.abs(arr) ** 2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: sum |c_j|^2 = {norm_sq!r}")
        object.__setattr__(self, "amplitudes", arr)

    @property
    def dim(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state matrix."""

    elements: np.ndarray

    def __post_init__(self):
        mat = _as_complex_matrix(self.elements)
        if np.max(np.abs(mat - mat.conj().T)) > HERM_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > HERM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        if np.min(np.linalg.eigvalsh(mat)) < -EIG_TOL:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        object.__setattr__(self, "elements", mat)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix (unitary, projector or POVM element by use)."""

    elements: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elements", _as_complex_matrix(self.elements))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.elements
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(self.dim))) <= tol)


def tensor(a, b):
    """Kronecker product of two states or two operators.

    Row-major ordering keeps the amplitude convention: |V> (x) |H> has its
    single nonzero entry at index 1, i.e. the VH slot.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.elements, b.elements))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.elements, b.elements))
    raise TypeError("tensor expects two StateVectors, two Operators or two DensityMatrices")


def fidelity_pure(phi: StateVector, psi: StateVector) -> float:
    """Squared overlap |<phi|psi>|^2 between two pure states."""
    if phi.dim != psi.dim:
        raise ValueError(f"dimension mismatch: {phi.dim} vs {psi.dim}")
    return float(np.abs(np.vdot(phi.amplitudes, psi.amplitudes)) ** 2)


def haar_random_state(dim: int, rng: np.random.Generator) -> StateVector:
    """Haar-uniform pure state: normalized vector of i.i.d. complex Gaussians."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(z / np.linalg.norm(z))


def density_from_state(psi: StateVector) -> DensityMatrix:
    """Rank-1 projector |psi><psi| as a DensityMatrix."""
    c = psi.amplitudes
    return DensityMatrix(np.outer(c, c.conj()))
