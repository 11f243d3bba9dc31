"""Two-qubit states in matrix and Bloch form.

Qubit order inside a pair is (Alice, Bob); Pauli basis is (X, Y, Z).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
ROUNDTRIP_TOL = 1e-12
SPECTRUM_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


class DimensionError(ValueError):
    pass


class StateValidityError(ValueError):
    pass


@dataclass(frozen=True)
class BlochForm:
    a: np.ndarray
    b: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(3))
        object.__setattr__(self, "T", np.asarray(self.T, dtype=float).reshape(3, 3))


@dataclass(frozen=True)
class CorrelationSpectrum:
    t1: float
    t2: float
    t3: float

    def __iter__(self):
        return iter((self.t1, self.t2, self.t3))


@dataclass(frozen=True)
class ValidationReport:
    hermitian_defect: float
    trace_defect: float
    min_eigenvalue: float

    @property
    def passed(self) -> bool:
        return (
            self.hermitian_defect <= HERMITIAN_TOL
            and self.trace_defect <= TRACE_TOL
            and self.min_eigenvalue >= -PSD_TOL
        )

    def __bool__(self):
        return self.passed


def validate_state(rho) -> ValidationReport:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    dim = rho.shape[0]
    if dim < 1 or dim & (dim - 1):
        raise DimensionError(f"dimension {dim} is not a power of 2")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(np.trace(rho) - 1.0))
    # eigvalsh only reads one triangle, so symmetrize first
    evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    return ValidationReport(herm, trace, float(evals.min()))


def bloch_decompose(rho) -> BlochForm:
    """Local Bloch vectors and correlation tensor of a two-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"two-qubit state must be 4x4, got {rho.shape}")
    report = validate_state(rho)
    if not report:
        raise StateValidityError(f"invalid state: {report}")
    a = np.array([np.trace(rho @ np.kron(s, I2)).real for s in PAULIS])
    b = np.array([np.trace(rho @ np.kron(I2, s)).real for s in PAULIS])
    T = np.array([[np.trace(rho @ np.kron(s, t)).real for t in PAULIS] for s in PAULIS])
    return BlochForm(a, b, T)


def bloch_compose(form: BlochForm) -> np.ndarray:
    """Inverse of :func:`bloch_decompose`. Physicality is not checked."""
    rho = np.kron(I2, I2).astype(complex)
    for j, s in enumerate(PAULIS):
        rho = rho + form.a[j] * np.kron(s, I2) + form.b[j] * np.kron(I2, s)
        for k, t in enumerate(PAULIS):
            rho = rho + form.T[j, k] * np.kron(s, t)
    return rho / 4


def jacobi_eigenvalues(m, tol: float = SPECTRUM_TOL, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a small real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(m, dtype=float)
    size = a.shape[0]
    scale = max(float(np.max(np.abs(a))), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale * 1e-3:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(size)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.diag(a).copy()


def correlation_spectrum(T) -> CorrelationSpectrum:
    """Eigenvalues of T^T T, sorted descending and clipped at zero."""
    T = np.asarray(T, dtype=float).reshape(3, 3)
    evals = jacobi_eigenvalues(T.T @ T)
    evals = np.sort(np.clip(evals, 0.0, None))[::-1]
    return CorrelationSpectrum(float(evals[0]), float(evals[1]), float(evals[2]))


def state_spectrum(rho) -> CorrelationSpectrum:
    return correlation_spectrum(bloch_decompose(rho).T)


def singlet() -> np.ndarray:
    psi = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int = 4) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def random_state(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed random density matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real
