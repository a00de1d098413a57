"""States, observables, POVMs and the depolarizing channel.

The registry at the bottom holds the two canonical pair scenarios: the qubit
state carrying robust macroscopic entanglement under a fixed split, and the
qutrit state whose violation survives a random bipartition.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import cos, pi, sin, sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InvariantError, NoiseError
from .linalg import (
    CMatrix,
    HERMITIAN_TOL,
    TRACE_TOL,
    as_cmatrix,
    commutator,
    dagger,
    eig_hermitian,
    is_hermitian,
    operator_norm,
    partial_trace,
    swap_operator,
)

LOGGER = logging.getLogger(__name__)

NORM_TOL = 1e-9
PSD_FLOOR = -1e-9
KET_TOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / sqrt(2)
SPIN1_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / sqrt(2)
SPIN1_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)

OBSERVABLE_NAMES = ("A1", "A2", "B1", "B2")


def spin_matrices(dim: int) -> Tuple[CMatrix, CMatrix, CMatrix]:
    """Pauli matrices for qubits, spin-1 matrices for qutrits."""

    if dim == 2:
        return PAULI_X, PAULI_Y, PAULI_Z
    if dim == 3:
        return SPIN1_X, SPIN1_Y, SPIN1_Z
    raise DimensionError(f"Spin observables are defined for dim 2 or 3, not {dim}")


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(amplitudes)):
            raise InvariantError("Ket amplitudes must be finite")
        norm = float(np.sum(np.abs(amplitudes) ** 2))
        if abs(norm - 1.0) > KET_TOL:
            raise InvariantError(f"Ket is not normalized (norm² = {norm})")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_amplitudes(cls, values: Sequence[complex], *, normalize: bool = True) -> "Ket":
        amplitudes = np.asarray(values, dtype=complex).ravel()
        if normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise InvariantError("Cannot normalize the zero vector")
            amplitudes = amplitudes / norm
        return cls(amplitudes)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def density(self) -> CMatrix:
        return np.outer(self.amplitudes, np.conj(self.amplitudes))

    def canonical_phase(self) -> "Ket":
        """Rotate the global phase so the largest amplitude is real and positive."""

        index = int(np.argmax(np.abs(self.amplitudes)))
        pivot = self.amplitudes[index]
        phase = pivot / abs(pivot) if abs(pivot) > 0 else 1.0
        return Ket(self.amplitudes / phase)

    def schmidt_coefficients(self, dims: Optional[Tuple[int, int]] = None) -> np.ndarray:
        if dims is None:
            side = int(round(sqrt(self.dim)))
            dims = (side, side)
        if dims[0] * dims[1] != self.dim:
            raise DimensionError(f"Dims {dims} do not match ket dimension {self.dim}")
        return np.linalg.svd(self.amplitudes.reshape(dims), compute_uv=False)


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: CMatrix
    norm_bound: float = 1.0

    def __post_init__(self) -> None:
        matrix = as_cmatrix(self.matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"Observable must be square, got {matrix.shape}")
        if not is_hermitian(matrix):
            raise InvariantError("Observable matrix is not Hermitian")
        norm = operator_norm(matrix)
        if norm > self.norm_bound + NORM_TOL:
            raise InvariantError(f"Operator norm {norm:.12g} exceeds bound {self.norm_bound:.12g}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def scaled(self, factor: float) -> "Observable":
        return Observable(self.matrix * factor, norm_bound=self.norm_bound * abs(factor))


@dataclass(frozen=True, eq=False)
class Povm:
    outcomes: Tuple[float, ...]
    elements: Tuple[CMatrix, ...]
    check: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        outcomes = tuple(float(value) for value in self.outcomes)
        elements = tuple(as_cmatrix(element) for element in self.elements)
        if len(outcomes) != len(elements) or not elements:
            raise DimensionError("A POVM needs one element per outcome label")
        if len({element.shape for element in elements}) != 1:
            raise DimensionError("POVM elements must share one dimension")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "elements", elements)
        if self.check:
            report = validate_povm(self)
            if not report.passed:
                raise InvariantError("Invalid POVM: " + "; ".join(report.failures))

    @property
    def dim(self) -> int:
        return int(self.elements[0].shape[0])

    @classmethod
    def projective(cls, observable: Observable) -> "Povm":
        system = eig_hermitian(observable.matrix)
        return cls(tuple(system.eigenvalues), system.projectors)

    @classmethod
    def trivial(cls, dim: int) -> "Povm":
        return cls((0.0,), (np.eye(dim, dtype=complex),))


@dataclass
class PovmReport:
    hermiticity_residual: float
    positivity_floor: float
    completeness_residual: float
    passed: bool
    failures: List[str]

    def to_dict(self) -> Dict[str, object]:
        return {
            "hermiticity_residual": self.hermiticity_residual,
            "positivity_floor": self.positivity_floor,
            "completeness_residual": self.completeness_residual,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def validate_povm(povm: Povm) -> PovmReport:
    """Check Hermiticity, positivity and completeness without raising."""

    failures: List[str] = []
    hermiticity = max(float(np.max(np.abs(element - dagger(element)))) for element in povm.elements)
    if hermiticity > HERMITIAN_TOL:
        failures.append(f"element not Hermitian (residual {hermiticity:.3g})")
    floor = min(
        float(np.min(np.linalg.eigvalsh((element + dagger(element)) / 2))) for element in povm.elements
    )
    if floor < PSD_FLOOR:
        failures.append(f"element not positive semidefinite (min eigenvalue {floor:.3g})")
    total = sum(povm.elements)
    completeness = float(np.max(np.abs(total - np.eye(povm.dim))))
    if completeness > HERMITIAN_TOL:
        failures.append(f"elements do not sum to identity (residual {completeness:.3g})")
    return PovmReport(
        hermiticity_residual=hermiticity,
        positivity_floor=floor,
        completeness_residual=completeness,
        passed=not failures,
        failures=failures,
    )


@dataclass(frozen=True, eq=False)
class PairScenario:
    """A two-particle state σ with the four single-particle observables."""

    sigma: CMatrix
    a1: Observable
    a2: Observable
    b1: Observable
    b2: Observable

    def __post_init__(self) -> None:
        dims = {obs.dim for obs in (self.a1, self.a2, self.b1, self.b2)}
        if len(dims) != 1:
            raise DimensionError(f"Observables have mixed dimensions {sorted(dims)}")
        dim = dims.pop()
        sigma = as_cmatrix(self.sigma)
        if sigma.shape != (dim * dim, dim * dim):
            raise DimensionError(f"σ has shape {sigma.shape}, expected {(dim * dim, dim * dim)}")
        if not is_hermitian(sigma):
            raise InvariantError("σ is not Hermitian")
        trace = np.trace(sigma).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvariantError(f"σ has trace {trace}, expected 1")
        floor = float(np.min(np.linalg.eigvalsh((sigma + dagger(sigma)) / 2)))
        if floor < PSD_FLOOR:
            raise InvariantError(f"σ is not positive semidefinite (min eigenvalue {floor:.3g})")
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.a1.dim

    def observables(self) -> Dict[str, Observable]:
        return {"A1": self.a1, "A2": self.a2, "B1": self.b1, "B2": self.b2}

    def with_sigma(self, sigma: CMatrix) -> "PairScenario":
        return PairScenario(sigma, self.a1, self.a2, self.b1, self.b2)

    def scaled(self, factor: float) -> "PairScenario":
        return PairScenario(
            self.sigma,
            self.a1.scaled(factor),
            self.a2.scaled(factor),
            self.b1.scaled(factor),
            self.b2.scaled(factor),
        )

    def is_permutation_symmetric(self, tol: float = 1e-10) -> bool:
        swap = swap_operator(self.dim)
        return bool(np.max(np.abs(swap @ self.sigma @ swap - self.sigma)) <= tol)

    def pure_state(self, tol: float = 1e-10) -> Optional[Ket]:
        """Return |ψ⟩ when σ is rank one, otherwise ``None``."""

        values, vectors = np.linalg.eigh(self.sigma)
        if abs(values[-1] - 1.0) > tol:
            return None
        return Ket.from_amplitudes(vectors[:, -1]).canonical_phase()


@dataclass(frozen=True)
class DepolarizingChannel:
    """Γ(ρ) = (1 − λ)ρ + λ I/d on a single particle."""

    dim: int
    lam: float

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionError(f"Channel dimension must be positive, got {self.dim}")
        if not 0.0 <= self.lam <= 1.0:
            raise NoiseError(f"Depolarizing strength must lie in [0, 1], got {self.lam}")

    def apply(self, rho: CMatrix) -> CMatrix:
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(f"Channel acts on dim {self.dim}, got {rho.shape}")
        return (1 - self.lam) * rho + self.lam * np.trace(rho) * np.eye(self.dim) / self.dim

    def apply_pair(self, sigma: CMatrix) -> CMatrix:
        return depolarize_pair(sigma, self)

    def weyl_probabilities(self) -> np.ndarray:
        """Mixing weights of the clock-shift unitaries, identity first."""

        count = self.dim * self.dim
        weights = np.full(count, self.lam / count)
        weights[0] += 1 - self.lam
        return weights

    def kraus_operators(self) -> List[CMatrix]:
        weights = self.weyl_probabilities()
        return [np.sqrt(weight) * unitary for weight, unitary in zip(weights, weyl_operators(self.dim))]


def weyl_operators(dim: int) -> List[CMatrix]:
    """Clock-shift unitaries X^j Z^k ordered by j·dim + k; index 0 is the identity."""

    omega = np.exp(2j * pi / dim)
    shift = np.roll(np.eye(dim, dtype=complex), 1, axis=0)
    clock = np.diag(omega ** np.arange(dim))
    operators = []
    for j in range(dim):
        for k in range(dim):
            operators.append(np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(clock, k))
    return operators


def depolarize_pair(sigma: CMatrix, channel: DepolarizingChannel) -> CMatrix:
    dim = channel.dim
    sigma = as_cmatrix(sigma)
    if sigma.shape != (dim * dim, dim * dim):
        raise DimensionError(f"σ has shape {sigma.shape}, channel expects pairs of dim {dim}")
    lam = channel.lam
    mixed = np.eye(dim, dtype=complex) / dim
    rho_a = partial_trace(sigma, [dim, dim], [0])
    rho_b = partial_trace(sigma, [dim, dim], [1])
    return (
        (1 - lam) ** 2 * sigma
        + lam * (1 - lam) * (np.kron(rho_a, mixed) + np.kron(mixed, rho_b))
        + lam**2 * np.kron(mixed, mixed)
    )


def symmetrize(sigma: CMatrix) -> CMatrix:
    """(σ + SσS)/2 with S the particle exchange."""

    dim = int(round(sqrt(sigma.shape[0])))
    swap = swap_operator(dim)
    return (sigma + swap @ sigma @ swap) / 2


def commutator_observable(a1: Observable, a2: Observable) -> Observable:
    """K with [a1, a2] = iK."""

    if a1.dim != a2.dim:
        raise DimensionError(f"Observables of dims {a1.dim} and {a2.dim} do not commute-compose")
    matrix = -1j * commutator(a1.matrix, a2.matrix)
    matrix = (matrix + dagger(matrix)) / 2
    return Observable(matrix, norm_bound=operator_norm(matrix))


def spin_plane_observable(dim: int, phi: float) -> Observable:
    x, y, _ = spin_matrices(dim)
    return Observable(cos(phi) * x + sin(phi) * y)


# Canonical scenarios

IME_PHI = 1.20
IME_AMPLITUDES: Dict[Tuple[int, int], complex] = {
    (0, 0): 0.34 - 0.87j,
    (0, 2): 0.07,
    (2, 0): 0.07,
    (1, 1): -0.33,
    (2, 2): 0.03 + 0.07j,
}


def ime_raw_amplitudes() -> np.ndarray:
    """Printed two-decimal amplitudes, before renormalization."""

    amplitudes = np.zeros(9, dtype=complex)
    for (i, j), value in IME_AMPLITUDES.items():
        amplitudes[3 * i + j] = value
    return amplitudes


def rme_state() -> PairScenario:
    ket = Ket(np.array([cos(pi / 8), 0.0, 0.0, -sin(pi / 8)], dtype=complex))
    x = Observable(PAULI_X)
    y = Observable(PAULI_Y)
    return PairScenario(ket.density(), x, y, x, y)


def ime_state() -> PairScenario:
    ket = Ket.from_amplitudes(ime_raw_amplitudes())
    rotated = spin_plane_observable(3, IME_PHI)
    return PairScenario(
        ket.density(),
        Observable(SPIN1_X),
        rotated,
        rotated,
        Observable(-SPIN1_X),
    )


def phi_plus_state() -> PairScenario:
    ket = Ket(np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / sqrt(2))
    x = Observable(PAULI_X)
    y = Observable(PAULI_Y)
    return PairScenario(ket.density(), x, y, x, y)


__all__ = [
    "DepolarizingChannel",
    "IME_AMPLITUDES",
    "IME_PHI",
    "Ket",
    "OBSERVABLE_NAMES",
    "Observable",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "PairScenario",
    "Povm",
    "PovmReport",
    "SPIN1_X",
    "SPIN1_Y",
    "SPIN1_Z",
    "commutator_observable",
    "depolarize_pair",
    "ime_raw_amplitudes",
    "ime_state",
    "phi_plus_state",
    "rme_state",
    "spin_matrices",
    "spin_plane_observable",
    "symmetrize",
    "validate_povm",
    "weyl_operators",
]
