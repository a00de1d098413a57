"""Noise thresholds and parameter sweeps."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import ceil, log2
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from config import settings

from .adversary import PerturbationModel, WitnessEvaluator
from .errors import BracketError, InvariantError, MacroentError, NoiseError
from .moments import WitnessForm, WitnessMode
from .objects import PairScenario
from .witness import NoiseKind, NoiseSpec, evaluate, f_q, povm_worstcase

LOGGER = logging.getLogger(__name__)

PARAMETER_FOR_KIND = {
    NoiseKind.DEPOLARIZE: "lambda",
    NoiseKind.LOSS: "p",
    NoiseKind.POVM: "epsilon",
}
KIND_FOR_PARAMETER = {name: kind for kind, name in PARAMETER_FOR_KIND.items()}

CLOSED_FORM_TOL = 1e-10
ADVERSARY_TOL = 1e-4
PRESWEEP_POINTS = 11


@dataclass
class ThresholdResult:
    parameter: str
    critical_value: float
    bracket: Tuple[float, float]
    iterations: int
    residual: float
    f_at_critical: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "parameter": self.parameter,
            "critical_value": self.critical_value,
            "bracket": list(self.bracket),
            "residual": self.residual,
            "iterations": self.iterations,
            "f_at_critical": self.f_at_critical,
        }


@dataclass
class SweepTable:
    parameter: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise InvariantError("Sweep grid and values must be 1-D arrays of equal length")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise InvariantError("Sweep grid must be strictly increasing")

    def __len__(self) -> int:
        return int(self.grid.size)

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(x), float(y)) for x, y in zip(self.grid, self.values)]

    def negative_intervals(self) -> List[Tuple[float, float]]:
        """Sub-intervals where f < 0, with crossings located by linear interpolation."""

        intervals: List[Tuple[float, float]] = []
        start: Optional[float] = float(self.grid[0]) if self.values.size and self.values[0] < 0 else None
        for i in range(1, self.grid.size):
            x0, x1 = self.grid[i - 1], self.grid[i]
            y0, y1 = self.values[i - 1], self.values[i]
            if (y0 < 0) == (y1 < 0):
                continue
            crossing = float(x0 + (x1 - x0) * y0 / (y0 - y1)) if y0 != y1 else float(x1)
            if y1 < 0:
                start = crossing
            else:
                intervals.append((start, crossing))
                start = None
        if start is not None:
            intervals.append((start, float(self.grid[-1])))
        return intervals

    def negative_fraction(self) -> float:
        span = float(self.grid[-1] - self.grid[0]) if self.grid.size > 1 else 0.0
        if span == 0.0:
            return 0.0
        return sum(hi - lo for lo, hi in self.negative_intervals()) / span

    def trapezoid(self) -> float:
        return float(trapezoid(self.values, self.grid))

    def summary(self) -> Dict[str, object]:
        return {
            "parameter": self.parameter,
            "rows": len(self),
            "negative_intervals": [list(interval) for interval in self.negative_intervals()],
            "negative_fraction": self.negative_fraction(),
        }


def _checked(witness: Callable[[float], float], x: float) -> float:
    value = float(witness(x))
    if not np.isfinite(value):
        raise BracketError(f"Witness is not finite at {x}")
    return value


def find_threshold(
    witness: Callable[[float], float],
    bracket: Tuple[float, float],
    tol: float = CLOSED_FORM_TOL,
    parameter: str = "lambda",
) -> ThresholdResult:
    """Bisect for the level where the witness stops (or starts) being negative."""

    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise BracketError(f"Bracket {bracket} is empty")
    if not tol > 0:
        raise BracketError(f"Tolerance must be positive, got {tol}")
    negative_lo = _checked(witness, lo) < 0
    negative_hi = _checked(witness, hi) < 0
    if negative_lo == negative_hi:
        raise BracketError(f"No sign change of the witness on [{lo}, {hi}]")

    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        value = _checked(witness, mid)
        iterations += 1
        if (value < 0) == negative_lo:
            lo = mid
        else:
            hi = mid
        LOGGER.debug("Bisection step %d: [%.15g, %.15g] f(mid)=%.6g", iterations, lo, hi, value)

    critical = 0.5 * (lo + hi)
    result = ThresholdResult(
        parameter=parameter,
        critical_value=critical,
        bracket=(lo, hi),
        iterations=iterations,
        residual=0.5 * (hi - lo),
        f_at_critical=_checked(witness, critical),
    )
    LOGGER.info("Threshold %s* = %.12g after %d iterations", parameter, critical, iterations)
    return result


def max_iterations(bracket: Tuple[float, float], tol: float) -> int:
    width = bracket[1] - bracket[0]
    return max(0, ceil(log2(width / tol)))


def presweep_bracket(
    witness: Callable[[float], float], lo: float, hi: float, points: int = PRESWEEP_POINTS
) -> Tuple[float, float]:
    """First grid cell where the witness goes from negative to non-negative."""

    grid = np.linspace(lo, hi, max(points, 2))
    previous = _checked(witness, float(grid[0]))
    for left, right in zip(grid[:-1], grid[1:]):
        current = _checked(witness, float(right))
        if previous < 0 <= current:
            return float(left), float(right)
        previous = current
    raise BracketError(f"Witness never crosses from violated to satisfied on [{lo}, {hi}]")


def _povm_witness(
    scenario: PairScenario, form: WitnessForm, model: PerturbationModel
) -> Callable[[float], float]:
    evaluator = WitnessEvaluator(scenario, form)
    cache: Dict[float, float] = {}

    def witness(level: float) -> float:
        if level not in cache:
            cache[level] = povm_worstcase(scenario, level, form, model, evaluator=evaluator).f
        return cache[level]

    return witness


def noise_witness(
    scenario: PairScenario,
    kind: Union[NoiseKind, str],
    mode: Union[WitnessMode, str] = WitnessMode.IID,
    q: Optional[float] = None,
    model: Optional[PerturbationModel] = None,
) -> Callable[[float], float]:
    kind = NoiseKind(kind)
    if kind is NoiseKind.NONE:
        raise NoiseError("A noise sweep needs a noise kind other than 'none'")
    form = WitnessForm(WitnessMode(mode), q)
    if kind is NoiseKind.POVM:
        return _povm_witness(scenario, form, model or PerturbationModel())
    return lambda level: evaluate(scenario, form.mode, NoiseSpec(kind, level), form.q).f


def scenario_threshold(
    scenario: PairScenario,
    mode: Union[WitnessMode, str],
    kind: Union[NoiseKind, str],
    tol: Optional[float] = None,
    model: Optional[PerturbationModel] = None,
    q: Optional[float] = None,
) -> ThresholdResult:
    kind = NoiseKind(kind)
    witness = noise_witness(scenario, kind, mode, q, model)
    hi = 0.5 if kind is NoiseKind.POVM else 1.0
    tol = tol if tol is not None else (ADVERSARY_TOL if kind is NoiseKind.POVM else CLOSED_FORM_TOL)
    bracket = presweep_bracket(witness, 0.0, hi)
    LOGGER.debug("Pre-sweep bracket for %s: %s", kind.value, bracket)
    return find_threshold(witness, bracket, tol, PARAMETER_FOR_KIND[kind])


def _uniform_grid(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise MacroentError(f"A sweep needs at least 2 steps, got {steps}")
    if not hi > lo:
        raise MacroentError(f"Sweep range [{lo}, {hi}] is empty")
    return np.linspace(lo, hi, steps)


def sweep_q(scenario: PairScenario, steps: int, lo: float = 0.0, hi: float = 1.0) -> SweepTable:
    grid = _uniform_grid(lo, hi, steps)
    values = [f_q(scenario, float(q)).f for q in grid]
    return SweepTable("q", grid, np.asarray(values))


def sweep_noise(
    scenario: PairScenario,
    kind: Union[NoiseKind, str],
    grid: Sequence[float],
    mode: Union[WitnessMode, str] = WitnessMode.IID,
    q: Optional[float] = None,
    model: Optional[PerturbationModel] = None,
) -> SweepTable:
    kind = NoiseKind(kind)
    grid = np.asarray(grid, dtype=float)
    witness = noise_witness(scenario, kind, mode, q, model)
    if kind is NoiseKind.POVM and grid.size:
        witness(float(grid[0]))
    workers = max(1, min(settings.threads, grid.size or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        values = list(pool.map(witness, (float(level) for level in grid)))
    return SweepTable(PARAMETER_FOR_KIND[kind], grid, np.asarray(values))


def sweep(
    scenario: PairScenario,
    parameter: str,
    steps: int,
    mode: Union[WitnessMode, str] = WitnessMode.IID,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
    model: Optional[PerturbationModel] = None,
) -> SweepTable:
    """Sweep q or one noise level over a uniform grid."""

    if parameter == "q":
        return sweep_q(scenario, steps, 0.0 if lo is None else lo, 1.0 if hi is None else hi)
    if parameter not in KIND_FOR_PARAMETER:
        raise MacroentError(f"Unknown sweep parameter {parameter!r}")
    kind = KIND_FOR_PARAMETER[parameter]
    default_hi = 0.5 if kind is NoiseKind.POVM else 1.0
    grid = _uniform_grid(0.0 if lo is None else lo, default_hi if hi is None else hi, steps)
    return sweep_noise(scenario, kind, grid, mode, model=model)


__all__ = [
    "KIND_FOR_PARAMETER",
    "PARAMETER_FOR_KIND",
    "SweepTable",
    "ThresholdResult",
    "find_threshold",
    "max_iterations",
    "noise_witness",
    "presweep_bracket",
    "scenario_threshold",
    "sweep",
    "sweep_noise",
    "sweep_q",
]
