"""Scenario files: a pair state with its four observables as JSON."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import numpy as np

from macroent.core.errors import InvariantError, MacroentError
from macroent.core.linalg import operator_norm
from macroent.core.objects import (
    OBSERVABLE_NAMES,
    Ket,
    Observable,
    PairScenario,
    Povm,
    ime_state,
    rme_state,
    validate_povm,
)

LOGGER = logging.getLogger(__name__)

REGISTRY: Dict[str, Callable[[], PairScenario]] = {
    "rme": rme_state,
    "ime": ime_state,
}


def _encode(values: np.ndarray) -> List[List[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex).ravel()]


def _decode(pairs: Sequence[Sequence[float]], size: int, what: str) -> np.ndarray:
    try:
        array = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvariantError(f"{what} must be a list of [re, im] pairs") from exc
    if array.ndim != 2 or array.shape[1] != 2:
        raise InvariantError(f"{what} must be a list of [re, im] pairs")
    if array.shape[0] != size:
        raise InvariantError(f"{what} has {array.shape[0]} entries, expected {size}")
    return array[:, 0] + 1j * array[:, 1]


def scenario_to_dict(scenario: PairScenario) -> Dict[str, object]:
    dim = scenario.dim
    data: Dict[str, object] = {"dim": dim}
    ket = scenario.pure_state()
    if ket is not None:
        data["state"] = _encode(ket.amplitudes)
    else:
        data["density"] = _encode(scenario.sigma)
    data["observables"] = {name: _encode(obs.matrix) for name, obs in scenario.observables().items()}
    return data


def scenario_from_dict(data: Dict[str, object]) -> PairScenario:
    """Build and validate a scenario; every failure surfaces as ``InvariantError``."""

    if not isinstance(data, dict):
        raise InvariantError("Scenario JSON must be an object")
    try:
        dim = int(data["dim"])
        observables = data["observables"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvariantError("Scenario needs an integer 'dim' and an 'observables' object") from exc
    if dim < 1:
        raise InvariantError(f"dim must be positive, got {dim}")
    if not isinstance(observables, dict) or set(observables) != set(OBSERVABLE_NAMES):
        raise InvariantError(f"Observables must be exactly {', '.join(OBSERVABLE_NAMES)}")

    try:
        if "state" in data:
            amplitudes = _decode(data["state"], dim * dim, "state")
            sigma = Ket(amplitudes).density()
        elif "density" in data:
            sigma = _decode(data["density"], dim**4, "density").reshape(dim * dim, dim * dim)
        else:
            raise InvariantError("Scenario needs a 'state' or a 'density'")
        bound = float(data.get("norm_bound", 1.0))
        matrices = {
            name: _decode(observables[name], dim * dim, f"observable {name}").reshape(dim, dim)
            for name in OBSERVABLE_NAMES
        }
        return PairScenario(
            sigma,
            Observable(matrices["A1"], bound),
            Observable(matrices["A2"], bound),
            Observable(matrices["B1"], bound),
            Observable(matrices["B2"], bound),
        )
    except InvariantError:
        raise
    except MacroentError as exc:
        raise InvariantError(str(exc)) from exc


def load_scenario(path: Union[str, Path]) -> PairScenario:
    path = Path(path).expanduser()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvariantError(f"{path} is not valid JSON: {exc}") from exc
    LOGGER.debug("Loaded scenario from %s", path)
    return scenario_from_dict(data)


def save_scenario(scenario: PairScenario, path: Union[str, Path]) -> Path:
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(scenario_to_dict(scenario), indent=2), encoding="utf-8")
    LOGGER.info("Wrote scenario to %s", path)
    return path


def resolve_scenario(name_or_path: str) -> PairScenario:
    """Registry name (``rme``, ``ime``) or a path to a scenario file."""

    factory = REGISTRY.get(name_or_path.strip().lower())
    if factory is not None:
        return factory()
    path = Path(name_or_path).expanduser()
    if not path.exists():
        raise InvariantError(f"No registered scenario or file named {name_or_path!r}")
    return load_scenario(path)


def validation_report(scenario: PairScenario) -> Dict[str, object]:
    povms = {
        name: validate_povm(Povm.projective(obs)).to_dict() for name, obs in scenario.observables().items()
    }
    ket = scenario.pure_state()
    return {
        "valid": True,
        "dim": scenario.dim,
        "pure": ket is not None,
        "permutation_symmetric": scenario.is_permutation_symmetric(),
        "trace": float(np.trace(scenario.sigma).real),
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(scenario.sigma))),
        "operator_norms": {name: operator_norm(obs.matrix) for name, obs in scenario.observables().items()},
        "povms": povms,
    }


__all__ = [
    "REGISTRY",
    "load_scenario",
    "resolve_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "validation_report",
]
