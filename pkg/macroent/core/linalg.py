"""Dense complex linear algebra for small composite systems.

All matrices are plain ``numpy`` arrays of ``complex128``.  Dimensions stay
small (products of 2 and 3, a few hundred at most) so every routine favours
exactness and validation over speed.
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from functools import reduce
from math import prod
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InvariantError

CMatrix = np.ndarray

HERMITIAN_TOL = 1e-10
PROJECTOR_TOL = 1e-12
DEGENERACY_GAP = 1e-9
TRACE_TOL = 1e-10


def as_cmatrix(values) -> CMatrix:
    """Coerce ``values`` to a finite 2-D complex array."""

    matrix = np.asarray(values, dtype=complex)
    if matrix.ndim != 2:
        raise DimensionError(f"Expected a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvariantError("Matrix contains NaN or infinite entries")
    return matrix


def _require_square(matrix: CMatrix, name: str = "matrix") -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {matrix.shape}")


def dagger(matrix: CMatrix) -> CMatrix:
    return np.conj(matrix).T


def is_hermitian(matrix: CMatrix, tol: float = HERMITIAN_TOL) -> bool:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.max(np.abs(matrix - dagger(matrix)), initial=0.0) <= tol)


def tensor(a: CMatrix, b: CMatrix) -> CMatrix:
    return np.kron(a, b)


def tensor_all(factors: Iterable[CMatrix]) -> CMatrix:
    return reduce(np.kron, factors)


def partial_trace(matrix: CMatrix, subsystem_dims: Sequence[int], keep: Iterable[int]) -> CMatrix:
    """Trace out every subsystem not listed in ``keep``.

    Kept subsystems stay in their original order.
    """

    matrix = as_cmatrix(matrix)
    _require_square(matrix)
    dims = [int(value) for value in subsystem_dims]
    if not dims or any(value < 1 for value in dims):
        raise DimensionError(f"Invalid subsystem dimensions {subsystem_dims}")
    if prod(dims) != matrix.shape[0]:
        raise DimensionError(
            f"Subsystem dimensions {dims} do not match matrix dimension {matrix.shape[0]}"
        )
    kept = sorted(set(int(index) for index in keep))
    if any(index < 0 or index >= len(dims) for index in kept):
        raise DimensionError(f"Kept subsystems {kept} out of range for {len(dims)} factors")
    if len(dims) > len(string.ascii_lowercase):
        raise DimensionError("Too many subsystems for partial_trace")

    rows = string.ascii_lowercase[: len(dims)]
    cols = "".join(
        rows[index] if index not in kept else string.ascii_uppercase[index] for index in range(len(dims))
    )
    out = "".join(rows[index] for index in kept) + "".join(cols[index] for index in kept)
    reduced = np.einsum(f"{rows}{cols}->{out}", matrix.reshape(dims + dims))
    kept_dim = prod(dims[index] for index in kept) if kept else 1
    return np.asarray(reduced).reshape(kept_dim, kept_dim)


def commutator(a: CMatrix, b: CMatrix) -> CMatrix:
    _require_square(a, "a")
    _require_square(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"Cannot commute shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def operator_norm(matrix: CMatrix) -> float:
    """Largest singular value."""

    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition with merged degenerate eigenspaces."""

    eigenvalues: np.ndarray
    projectors: Tuple[CMatrix, ...]

    def __len__(self) -> int:
        return len(self.projectors)

    def reconstruct(self) -> CMatrix:
        return sum(value * projector for value, projector in zip(self.eigenvalues, self.projectors))


def eig_hermitian(matrix: CMatrix) -> EigenSystem:
    matrix = as_cmatrix(matrix)
    _require_square(matrix)
    if not is_hermitian(matrix):
        raise InvariantError("eig_hermitian requires a Hermitian matrix")
    values, vectors = np.linalg.eigh((matrix + dagger(matrix)) / 2)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]

    groups: list[list[int]] = [[0]]
    for index in range(1, len(values)):
        if values[index - 1] - values[index] < DEGENERACY_GAP:
            groups[-1].append(index)
        else:
            groups.append([index])

    eigenvalues = np.array([float(np.mean(values[group])) for group in groups])
    projectors = []
    for group in groups:
        block = vectors[:, group]
        projectors.append(block @ dagger(block))
    return EigenSystem(eigenvalues=eigenvalues, projectors=tuple(projectors))


def expect(state: CMatrix, op: CMatrix) -> complex:
    """Return tr(state · op) for a unit-trace density matrix."""

    _require_square(state, "state")
    _require_square(op, "op")
    if state.shape != op.shape:
        raise DimensionError(f"State {state.shape} and operator {op.shape} differ in dimension")
    trace = np.trace(state)
    if abs(trace - 1.0) > TRACE_TOL:
        raise InvariantError(f"State trace {trace} is not 1")
    return complex(np.einsum("ij,ji->", state, op))


def swap_operator(dim: int) -> CMatrix:
    """Exchange operator |ij⟩ ↦ |ji⟩ on ℂ^dim ⊗ ℂ^dim."""

    swap = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            swap[j * dim + i, i * dim + j] = 1.0
    return swap


def hermitian_from_params(values: Sequence[float], dim: int) -> CMatrix:
    """Map ``dim**2`` reals to a Hermitian matrix.

    Layout: the real diagonal first, then (re, im) for each upper-triangle entry.
    """

    values = np.asarray(values, dtype=float)
    if values.shape != (dim * dim,):
        raise DimensionError(f"Expected {dim * dim} parameters, got {values.shape}")
    matrix = np.diag(values[:dim]).astype(complex)
    rows, cols = np.triu_indices(dim, 1)
    off = values[dim:].reshape(-1, 2)
    matrix[rows, cols] = off[:, 0] + 1j * off[:, 1]
    matrix[cols, rows] = off[:, 0] - 1j * off[:, 1]
    return matrix


def hermitian_to_params(matrix: CMatrix) -> np.ndarray:
    dim = matrix.shape[0]
    rows, cols = np.triu_indices(dim, 1)
    upper = matrix[rows, cols]
    off = np.column_stack([upper.real, upper.imag]).ravel()
    return np.concatenate([np.real(np.diag(matrix)), off])


def random_unitary(rng: np.random.Generator, dim: int) -> CMatrix:
    """Haar-random unitary via QR of a complex Ginibre matrix."""

    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(ginibre)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_hermitian(rng: np.random.Generator, dim: int) -> CMatrix:
    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (ginibre + dagger(ginibre)) / 2


__all__ = [
    "CMatrix",
    "EigenSystem",
    "as_cmatrix",
    "commutator",
    "dagger",
    "eig_hermitian",
    "expect",
    "hermitian_from_params",
    "hermitian_to_params",
    "is_hermitian",
    "operator_norm",
    "partial_trace",
    "random_hermitian",
    "random_unitary",
    "swap_operator",
    "tensor",
    "tensor_all",
]
