"""Multi-start search for the most negative witness value.

States are parameterized as offsets from |00⟩ and observables either by one
angle in the spin plane or by a Hermitian matrix whose eigenvalues are squashed
through ``sin``.  Each start runs Nelder-Mead followed by one restart from the
converged point.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from math import atan2, pi, sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from config import settings

from macroent.io.scenario_io import scenario_to_dict

from .errors import InvariantError, MacroentError
from .linalg import dagger, hermitian_from_params, hermitian_to_params
from .moments import WitnessMode
from .objects import (
    OBSERVABLE_NAMES,
    Ket,
    Observable,
    PairScenario,
    spin_matrices,
    spin_plane_observable,
)
from .witness import f_avg, f_iid

LOGGER = logging.getLogger(__name__)

PENALTY = 1e6
XATOL = 1e-9
FATOL = 1e-12


class StateMode(str, Enum):
    FREE = "free"
    SYMMETRIC = "symmetric"
    FIXED = "fixed"


class ObservableMode(str, Enum):
    SPIN_PLANE = "spin-plane"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class Layout:
    dim: int
    state_mode: StateMode = StateMode.FREE
    observable_mode: ObservableMode = ObservableMode.SPIN_PLANE
    witness: WitnessMode = WitnessMode.IID
    fixed_state: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise MacroentError(f"The optimizer supports dim 2 or 3, got {self.dim}")
        object.__setattr__(self, "state_mode", StateMode(self.state_mode))
        object.__setattr__(self, "observable_mode", ObservableMode(self.observable_mode))
        witness = WitnessMode(self.witness)
        if witness is WitnessMode.Q:
            raise MacroentError("The optimizer targets the iid or avg witness")
        object.__setattr__(self, "witness", witness)
        if self.state_mode is StateMode.FIXED:
            if self.fixed_state is None:
                raise MacroentError("A fixed-state layout needs fixed_state")
            object.__setattr__(self, "fixed_state", Ket.from_amplitudes(self.fixed_state).amplitudes)

    @property
    def state_size(self) -> int:
        if self.state_mode is StateMode.FREE:
            return 2 * self.dim * self.dim
        if self.state_mode is StateMode.SYMMETRIC:
            return self.dim * (self.dim + 1)
        return 0

    @property
    def observable_size(self) -> int:
        return 1 if self.observable_mode is ObservableMode.SPIN_PLANE else self.dim * self.dim

    @property
    def size(self) -> int:
        return self.state_size + len(OBSERVABLE_NAMES) * self.observable_size

    def slices(self) -> Dict[str, slice]:
        slices = {"state": slice(0, self.state_size)}
        offset = self.state_size
        for name in OBSERVABLE_NAMES:
            slices[name] = slice(offset, offset + self.observable_size)
            offset += self.observable_size
        return slices


@dataclass(frozen=True, eq=False)
class ParamVector:
    values: np.ndarray
    layout: Layout

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.layout.size,):
            raise MacroentError(f"Expected {self.layout.size} parameters, got {values.shape}")
        object.__setattr__(self, "values", values)


def _base_ket(dim: int) -> np.ndarray:
    ket = np.zeros(dim * dim, dtype=complex)
    ket[0] = 1.0
    return ket


def _decode_state(values: np.ndarray, layout: Layout) -> Ket:
    dim = layout.dim
    if layout.state_mode is StateMode.FIXED:
        return Ket(layout.fixed_state)
    offsets = values[0::2] + 1j * values[1::2]
    if layout.state_mode is StateMode.FREE:
        amplitudes = _base_ket(dim) + offsets
    else:
        rows, cols = np.triu_indices(dim)
        upper = np.zeros((dim, dim), dtype=complex)
        upper[rows, cols] = offsets
        full = upper + np.triu(upper, 1).T
        amplitudes = _base_ket(dim) + full.ravel()
    return Ket.from_amplitudes(amplitudes)


def _encode_state(ket: Ket, layout: Layout) -> np.ndarray:
    dim = layout.dim
    if layout.state_mode is StateMode.FIXED:
        return np.zeros(0)
    offsets = ket.canonical_phase().amplitudes - _base_ket(dim)
    if layout.state_mode is StateMode.SYMMETRIC:
        rows, cols = np.triu_indices(dim)
        offsets = offsets.reshape(dim, dim)[rows, cols]
    return np.column_stack([offsets.real, offsets.imag]).ravel()


def _decode_observable(values: np.ndarray, layout: Layout) -> Observable:
    if layout.observable_mode is ObservableMode.SPIN_PLANE:
        return spin_plane_observable(layout.dim, float(values[0]))
    eigenvalues, vectors = np.linalg.eigh(hermitian_from_params(values, layout.dim))
    matrix = (vectors * np.sin(eigenvalues)) @ dagger(vectors)
    return Observable((matrix + dagger(matrix)) / 2)


def _encode_observable(observable: Observable, layout: Layout) -> np.ndarray:
    if layout.observable_mode is ObservableMode.SPIN_PLANE:
        x, y, _ = spin_matrices(layout.dim)
        # Projects onto the spin plane; exact for cos φ X + sin φ Y.
        angle = atan2(np.trace(observable.matrix @ y).real, np.trace(observable.matrix @ x).real)
        return np.array([angle])
    eigenvalues, vectors = np.linalg.eigh(observable.matrix)
    angles = np.arcsin(np.clip(eigenvalues, -1.0, 1.0))
    return hermitian_to_params((vectors * angles) @ dagger(vectors))


def decode(params: ParamVector) -> PairScenario:
    layout = params.layout
    slices = layout.slices()
    ket = _decode_state(params.values[slices["state"]], layout)
    observables = [_decode_observable(params.values[slices[name]], layout) for name in OBSERVABLE_NAMES]
    return PairScenario(ket.density(), *observables)


def encode(scenario: PairScenario, layout: Layout) -> ParamVector:
    if scenario.dim != layout.dim:
        raise MacroentError(f"Scenario dim {scenario.dim} does not match layout dim {layout.dim}")
    chunks = []
    if layout.state_mode is not StateMode.FIXED:
        ket = scenario.pure_state()
        if ket is None:
            raise InvariantError("Only pure states can be encoded")
        chunks.append(_encode_state(ket, layout))
    observables = scenario.observables()
    chunks.extend(_encode_observable(observables[name], layout) for name in OBSERVABLE_NAMES)
    return ParamVector(np.concatenate(chunks), layout)


def objective_value(scenario: PairScenario, witness: WitnessMode) -> float:
    if witness is WitnessMode.AVG:
        return f_avg(scenario).f
    return f_iid(scenario).f


@dataclass
class OptResult:
    best_f: float
    scenario: PairScenario
    starts: int
    seed: Optional[int]
    per_start_bests: List[float] = field(default_factory=list)
    params: Optional[ParamVector] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "best_f": self.best_f,
            "starts": self.starts,
            "seed": self.seed,
            "per_start_bests": list(self.per_start_bests),
            "scenario": scenario_to_dict(self.scenario),
        }


def _initial_point(rng: np.random.Generator, layout: Layout) -> np.ndarray:
    x0 = rng.uniform(-1.0, 1.0, size=layout.size)
    if layout.observable_mode is ObservableMode.SPIN_PLANE:
        for name, part in layout.slices().items():
            if name != "state":
                x0[part] = rng.uniform(-pi, pi, size=part.stop - part.start)
    return x0


def optimize(layout: Layout, starts: int = 64, seed: Optional[int] = None) -> OptResult:
    if starts < 1:
        raise MacroentError(f"Need at least one start, got {starts}")

    def objective(values: np.ndarray) -> float:
        try:
            scenario = decode(ParamVector(values, layout))
        except MacroentError:
            return PENALTY
        return objective_value(scenario, layout.witness)

    options = {"maxiter": settings.max_iter, "xatol": XATOL, "fatol": FATOL, "adaptive": True}
    children = np.random.SeedSequence(seed).spawn(starts)

    def run_start(index: int) -> Tuple[float, np.ndarray]:
        rng = np.random.default_rng(children[index])
        result = minimize(objective, _initial_point(rng, layout), method="Nelder-Mead", options=options)
        result = minimize(objective, result.x, method="Nelder-Mead", options=options)
        LOGGER.debug("Start %d finished at f=%.12g", index, result.fun)
        return float(result.fun), np.asarray(result.x)

    workers = max(1, min(settings.threads, starts))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_start, range(starts)))

    per_start = [value for value, _ in outcomes]
    best = int(np.argmin(per_start))
    params = ParamVector(outcomes[best][1], layout)
    scenario = decode(params)
    ket = scenario.pure_state()
    if ket is not None:
        scenario = scenario.with_sigma(ket.canonical_phase().density())
    best_f = objective_value(scenario, layout.witness)
    LOGGER.info("Optimizer finished: best f=%.12g over %d starts", best_f, starts)
    return OptResult(
        best_f=best_f,
        scenario=scenario,
        starts=starts,
        seed=seed,
        per_start_bests=per_start,
        params=params,
    )


def phi_plus_ket(dim: int) -> np.ndarray:
    ket = np.zeros(dim * dim, dtype=complex)
    for i in range(dim):
        ket[i * dim + i] = 1.0 / sqrt(dim)
    return ket


def optimize_rme(
    dim: int = 2,
    starts: int = 64,
    seed: Optional[int] = None,
    mode: str = ObservableMode.SPIN_PLANE.value,
    state: str = "free",
) -> OptResult:
    """Minimize the IID witness over states and observables."""

    if state == "phi-plus":
        layout = Layout(dim, StateMode.FIXED, mode, WitnessMode.IID, fixed_state=phi_plus_ket(dim))
    elif state == "free":
        layout = Layout(dim, StateMode.FREE, mode, WitnessMode.IID)
    else:
        raise MacroentError(f"Unknown state family {state!r}")
    return optimize(layout, starts, seed)


def optimize_ime(
    dim: int = 3,
    starts: int = 64,
    seed: Optional[int] = None,
    mode: str = ObservableMode.SPIN_PLANE.value,
) -> OptResult:
    """Minimize the q-averaged witness over exchange-symmetric states."""

    return optimize(Layout(dim, StateMode.SYMMETRIC, mode, WitnessMode.AVG), starts, seed)


__all__ = [
    "Layout",
    "ObservableMode",
    "OptResult",
    "ParamVector",
    "StateMode",
    "decode",
    "encode",
    "objective_value",
    "optimize",
    "optimize_ime",
    "optimize_rme",
    "phi_plus_ket",
]
