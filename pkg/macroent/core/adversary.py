"""Worst-case imperfect measurements.

Each measured observable X = Σ_a a·P_a is replaced by the POVM
E_a = P_a + ε·C_a with Σ_a C_a = 0.  One outcome per measurement (label 0
when present, otherwise the lowest label) is the dependent one, so the free
components are the C_a of the remaining outcomes.  The measured operators
become

    X̃  = X  + ε Σ_a (a  − z ) C_a
    X̃₂ = X² + ε Σ_a (a² − z²) C_a

and the adversary picks the C_a that push the witness up the most.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog, minimize

from config import settings

from .errors import NoiseError
from .linalg import CMatrix, dagger, eig_hermitian, hermitian_from_params, hermitian_to_params, operator_norm
from .moments import (
    MomentOperators,
    SLOT_NAMES,
    WitnessForm,
    WitnessMode,
    assemble_terms,
    pair_moments,
    witness_value,
)
from .objects import PairScenario, Povm, commutator_observable

LOGGER = logging.getLogger(__name__)

GRADIENT_STEP = 1e-5
ZERO_LABEL_TOL = 1e-9
POSITIVITY_FLOOR = -1e-12
SHRINK_STEPS = 40


@dataclass(frozen=True)
class PerturbationModel:
    """Admissible set and solution method for the POVM adversary."""

    traceless: bool = True
    first_order: bool = True
    positivity: bool = False
    starts: int = field(default_factory=lambda: settings.adversary_starts)
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.positivity and self.first_order:
            raise NoiseError("POVM positivity can only be enforced by the exact adversary")
        if self.starts < 1:
            raise NoiseError(f"The adversary needs at least one start, got {self.starts}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "traceless": self.traceless,
            "first_order": self.first_order,
            "positivity": self.positivity,
            "starts": self.starts,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class MeasurementSlot:
    name: str
    labels: np.ndarray
    projectors: Tuple[CMatrix, ...]
    dependent: int

    @property
    def dim(self) -> int:
        return int(self.projectors[0].shape[0])

    @property
    def free(self) -> Tuple[int, ...]:
        return tuple(index for index in range(len(self.labels)) if index != self.dependent)

    def shifts(self, index: int) -> Tuple[float, float]:
        a = float(self.labels[index])
        z = float(self.labels[self.dependent])
        return a - z, a * a - z * z

    def elements(self, eps: float, components: Tuple[CMatrix, ...]) -> List[CMatrix]:
        elements = [projector.copy() for projector in self.projectors]
        for index, component in zip(self.free, components):
            elements[index] = elements[index] + eps * component
            elements[self.dependent] = elements[self.dependent] - eps * component
        return elements

    def povm(self, eps: float, components: Tuple[CMatrix, ...]) -> Povm:
        return Povm(tuple(self.labels), tuple(self.elements(eps, components)), check=False)


def measurement_slots(scenario: PairScenario) -> Tuple[MeasurementSlot, ...]:
    matrices = {name: obs.matrix for name, obs in scenario.observables().items()}
    matrices["KA"] = commutator_observable(scenario.a1, scenario.a2).matrix
    matrices["KB"] = commutator_observable(scenario.b1, scenario.b2).matrix
    slots = []
    for name in SLOT_NAMES:
        system = eig_hermitian(matrices[name])
        labels = np.asarray(system.eigenvalues, dtype=float)
        zeros = np.flatnonzero(np.abs(labels) < ZERO_LABEL_TOL)
        dependent = int(zeros[0]) if zeros.size else int(np.argmin(labels))
        slots.append(MeasurementSlot(name, labels, system.projectors, dependent))
    return tuple(slots)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """One C_a per free outcome, keyed by slot name."""

    components: Dict[str, Tuple[CMatrix, ...]]

    def scaled(self, factor: float) -> "Perturbation":
        return Perturbation({name: tuple(factor * c for c in comps) for name, comps in self.components.items()})

    def max_norm(self) -> float:
        norms = [operator_norm(c) for comps in self.components.values() for c in comps]
        return max(norms, default=0.0)


def perturbed_operators(
    base: MomentOperators, slots: Tuple[MeasurementSlot, ...], eps: float, perturbation: Perturbation
) -> MomentOperators:
    first = dict(base.first)
    second = dict(base.second)
    for slot in slots:
        components = perturbation.components.get(slot.name, ())
        if len(components) > len(slot.free):
            raise NoiseError(f"Slot {slot.name} has {len(slot.free)} free outcomes, got {len(components)} components")
        for index, component in zip(slot.free, components):
            shift, shift_sq = slot.shifts(index)
            first[slot.name] = first[slot.name] + eps * shift * component
            if slot.name in second:
                second[slot.name] = second[slot.name] + eps * shift_sq * component
    return MomentOperators(first=first, second=second)


def hermitian_basis(dim: int) -> List[CMatrix]:
    """Hilbert-Schmidt orthonormal basis of Hermitian dim×dim matrices."""

    basis = []
    for k in range(dim * dim):
        unit = np.zeros(dim * dim)
        unit[k] = 1.0
        matrix = hermitian_from_params(unit, dim)
        basis.append(matrix if k < dim else matrix / sqrt(2))
    return basis


def admissible_component(matrix: CMatrix, traceless: bool) -> CMatrix:
    """Project onto the traceless subspace if asked, then clip to operator norm 1."""

    dim = matrix.shape[0]
    if traceless:
        matrix = matrix - np.trace(matrix).real / dim * np.eye(dim)
    norm = operator_norm(matrix)
    if norm > 1.0:
        matrix = matrix / norm
    return matrix


def _is_positive(elements: List[CMatrix]) -> bool:
    return all(np.min(np.linalg.eigvalsh((e + dagger(e)) / 2)) >= POSITIVITY_FLOOR for e in elements)


def shrink_to_positive(slot: MeasurementSlot, eps: float, components: Tuple[CMatrix, ...]) -> Tuple[CMatrix, ...]:
    """Largest uniform rescaling t ∈ [0, 1] of the components keeping every E_a ≥ 0."""

    if _is_positive(slot.elements(eps, components)):
        return components
    lo, hi = 0.0, 1.0
    for _ in range(SHRINK_STEPS):
        mid = 0.5 * (lo + hi)
        if _is_positive(slot.elements(eps * mid, components)):
            lo = mid
        else:
            hi = mid
    return tuple(lo * component for component in components)


def _maximize_linear(gradient: CMatrix, traceless: bool) -> Tuple[float, CMatrix]:
    """max tr(G·C) over Hermitian C with ‖C‖ ≤ 1 (and tr C = 0 when traceless).

    The optimum is diagonal in G's eigenbasis, so only its eigenvalues are solved for.
    """

    values, vectors = np.linalg.eigh((gradient + dagger(gradient)) / 2)
    if traceless:
        result = linprog(
            -values,
            A_eq=np.ones((1, values.size)),
            b_eq=[0.0],
            bounds=[(-1.0, 1.0)] * values.size,
            method="highs",
        )
        if not result.success:
            raise NoiseError(f"Linear program for the first-order adversary failed: {result.message}")
        weights = np.asarray(result.x, dtype=float)
    else:
        weights = np.sign(values)
    component = (vectors * weights) @ dagger(vectors)
    return float(values @ weights), component


@dataclass
class AdversaryResult:
    eps: float
    f: float
    terms: Dict[str, float]
    perturbation: Perturbation
    exact: bool
    slope: Optional[float] = None
    per_start: List[float] = field(default_factory=list)


class WitnessEvaluator:
    """Terms of one witness form as a function of the measurement perturbation."""

    def __init__(self, scenario: PairScenario, form: WitnessForm) -> None:
        self.scenario = scenario
        self.form = form
        self.sigma = form.prepare_state(scenario.sigma)
        self.weights = form.weights()
        self.base = MomentOperators.ideal(scenario)
        self.slots = measurement_slots(scenario)
        self.free_layout = [(slot, index) for slot in self.slots for index in slot.free]
        self._first_order_cache: Dict[bool, Tuple[Perturbation, float]] = {}

    def terms(self, eps: float = 0.0, perturbation: Optional[Perturbation] = None) -> Dict[str, float]:
        ops = self.base
        if perturbation is not None and eps != 0.0:
            ops = perturbed_operators(self.base, self.slots, eps, perturbation)
        return assemble_terms(pair_moments(self.sigma, ops), self.weights)

    def f(self, eps: float = 0.0, perturbation: Optional[Perturbation] = None) -> float:
        return witness_value(self.terms(eps, perturbation))

    def linearized_terms(self, eps: float, perturbation: Perturbation) -> Dict[str, float]:
        # Central differences are exact for the linear part of a quadratic.
        base = self.terms()
        plus = self.terms(GRADIENT_STEP, perturbation)
        minus = self.terms(-GRADIENT_STEP, perturbation)
        return {
            name: base[name] + eps * (plus[name] - minus[name]) / (2 * GRADIENT_STEP) for name in base
        }

    def gradients(self) -> Dict[Tuple[str, int], CMatrix]:
        """Gradient of f with respect to each free component, as an operator."""

        dim = self.scenario.dim
        basis = hermitian_basis(dim)
        gradients: Dict[Tuple[str, int], CMatrix] = {}
        for slot, index in self.free_layout:
            position = slot.free.index(index)
            gradient = np.zeros((dim, dim), dtype=complex)
            for element in basis:
                components = [np.zeros((dim, dim), dtype=complex) for _ in slot.free]
                components[position] = element
                probe = Perturbation({slot.name: tuple(components)})
                slope = (self.f(GRADIENT_STEP, probe) - self.f(-GRADIENT_STEP, probe)) / (2 * GRADIENT_STEP)
                gradient = gradient + slope * element
            gradients[(slot.name, index)] = gradient
        return gradients

    def first_order_direction(self, traceless: bool) -> Tuple[Perturbation, float]:
        """Worst-case components and the resulting slope df/dε."""

        cache = self._first_order_cache
        if traceless not in cache:
            components: Dict[str, List[CMatrix]] = {slot.name: [] for slot in self.slots}
            slope = 0.0
            for (name, _), gradient in self.gradients().items():
                value, component = _maximize_linear(gradient, traceless)
                slope += value
                components[name].append(component)
            perturbation = Perturbation({name: tuple(comps) for name, comps in components.items()})
            LOGGER.debug("First-order adversary slope %.12g (traceless=%s)", slope, traceless)
            cache[traceless] = (perturbation, slope)
        return cache[traceless]

    def encode(self, perturbation: Perturbation) -> np.ndarray:
        chunks = []
        for slot, index in self.free_layout:
            position = slot.free.index(index)
            components = perturbation.components.get(slot.name, ())
            if position < len(components):
                chunks.append(hermitian_to_params(components[position]))
            else:
                chunks.append(np.zeros(slot.dim * slot.dim))
        return np.concatenate(chunks) if chunks else np.zeros(0)

    def decode(self, values: np.ndarray, eps: float, model: PerturbationModel) -> Perturbation:
        dim = self.scenario.dim
        size = dim * dim
        components: Dict[str, List[CMatrix]] = {slot.name: [] for slot in self.slots}
        for offset, (slot, _) in enumerate(self.free_layout):
            raw = hermitian_from_params(values[offset * size : (offset + 1) * size], dim)
            components[slot.name].append(admissible_component(raw, model.traceless))
        if model.positivity:
            for slot in self.slots:
                components[slot.name] = list(shrink_to_positive(slot, eps, tuple(components[slot.name])))
        return Perturbation({name: tuple(comps) for name, comps in components.items()})


def first_order_worst_case(evaluator: WitnessEvaluator, eps: float, model: PerturbationModel) -> AdversaryResult:
    perturbation, slope = evaluator.first_order_direction(model.traceless)
    terms = evaluator.linearized_terms(eps, perturbation)
    return AdversaryResult(
        eps=eps,
        f=witness_value(terms),
        terms=terms,
        perturbation=perturbation,
        exact=False,
        slope=slope,
    )


def exact_worst_case(evaluator: WitnessEvaluator, eps: float, model: PerturbationModel) -> AdversaryResult:
    """Multi-start Nelder-Mead on the full quadratic, seeded from the first-order optimum."""

    if eps == 0.0 or not evaluator.free_layout:
        terms = evaluator.terms()
        empty = Perturbation({})
        return AdversaryResult(eps=eps, f=witness_value(terms), terms=terms, perturbation=empty, exact=True)

    seeded, _ = evaluator.first_order_direction(model.traceless)
    x0 = evaluator.encode(seeded)

    def objective(values: np.ndarray) -> float:
        return -evaluator.f(eps, evaluator.decode(values, eps, model))

    children = np.random.SeedSequence(model.seed).spawn(model.starts)

    def run_start(index: int) -> Tuple[float, np.ndarray]:
        rng = np.random.default_rng(children[index])
        start = x0 if index == 0 else rng.uniform(-1.0, 1.0, size=x0.size)
        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"maxiter": settings.max_iter, "xatol": 1e-8, "fatol": 1e-12},
        )
        LOGGER.debug("Adversary start %d at eps=%.6g: f=%.12g", index, eps, -result.fun)
        return float(-result.fun), np.asarray(result.x)

    workers = max(1, min(settings.threads, model.starts))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_start, range(model.starts)))

    per_start = [value for value, _ in outcomes]
    best = int(np.argmax(per_start))
    perturbation = evaluator.decode(outcomes[best][1], eps, model)
    terms = evaluator.terms(eps, perturbation)
    return AdversaryResult(
        eps=eps,
        f=witness_value(terms),
        terms=terms,
        perturbation=perturbation,
        exact=True,
        per_start=per_start,
    )


def worst_case(
    scenario: PairScenario,
    eps: float,
    form: Optional[WitnessForm] = None,
    model: Optional[PerturbationModel] = None,
    evaluator: Optional[WitnessEvaluator] = None,
) -> AdversaryResult:
    if not np.isfinite(eps) or eps < 0:
        raise NoiseError(f"POVM perturbation strength must be ≥ 0, got {eps}")
    model = model or PerturbationModel()
    evaluator = evaluator or WitnessEvaluator(scenario, form or WitnessForm(WitnessMode.IID))
    if model.first_order:
        return first_order_worst_case(evaluator, eps, model)
    return exact_worst_case(evaluator, eps, model)


def sample_perturbation(
    rng: np.random.Generator, scenario: PairScenario, model: Optional[PerturbationModel] = None
) -> Perturbation:
    """Random admissible components, uniform in the raw Hermitian parameters."""

    model = model or PerturbationModel()
    dim = scenario.dim
    components = {}
    for slot in measurement_slots(scenario):
        components[slot.name] = tuple(
            admissible_component(hermitian_from_params(rng.uniform(-1.0, 1.0, size=dim * dim), dim), model.traceless)
            for _ in slot.free
        )
    return Perturbation(components)


def evaluate_perturbation(
    scenario: PairScenario,
    eps: float,
    perturbation: Perturbation,
    form: Optional[WitnessForm] = None,
    model: Optional[PerturbationModel] = None,
) -> AdversaryResult:
    """Witness under one given perturbation, at the order the model asks for."""

    model = model or PerturbationModel()
    evaluator = WitnessEvaluator(scenario, form or WitnessForm(WitnessMode.IID))
    if model.first_order:
        terms = evaluator.linearized_terms(eps, perturbation)
    else:
        if model.positivity:
            perturbation = Perturbation(
                {
                    slot.name: shrink_to_positive(slot, eps, perturbation.components.get(slot.name, ()))
                    for slot in evaluator.slots
                }
            )
        terms = evaluator.terms(eps, perturbation)
    return AdversaryResult(
        eps=eps,
        f=witness_value(terms),
        terms=terms,
        perturbation=perturbation,
        exact=not model.first_order,
    )


__all__ = [
    "AdversaryResult",
    "MeasurementSlot",
    "Perturbation",
    "PerturbationModel",
    "WitnessEvaluator",
    "admissible_component",
    "evaluate_perturbation",
    "exact_worst_case",
    "first_order_worst_case",
    "hermitian_basis",
    "measurement_slots",
    "perturbed_operators",
    "sample_perturbation",
    "shrink_to_positive",
    "worst_case",
]
