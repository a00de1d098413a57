"""Witness functionals: general, IID, bipartition and averaged forms.

``f < 0`` certifies entanglement between the two collective modes.  All
single-pair forms are evaluated through :mod:`macroent.core.moments`; noise
acts on the moments in closed form, and imperfect measurements go through the
adversary in :mod:`macroent.core.adversary`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .adversary import PerturbationModel, WitnessEvaluator, worst_case
from .errors import DimensionError, NoiseError
from .linalg import CMatrix, as_cmatrix, commutator, expect
from .moments import (
    MomentOperators,
    PairMoments,
    TERM_NAMES,
    WitnessForm,
    WitnessMode,
    assemble_terms,
    pair_moments,
    witness_value,
)
from .objects import Observable, PairScenario

LOGGER = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-12


class Regime(str, Enum):
    NOISELESS = "noiseless"
    DEPOLARIZED = "depolarized"
    LOSSY = "lossy"
    POVM_WORSTCASE = "povm_worstcase"


class NoiseKind(str, Enum):
    NONE = "none"
    DEPOLARIZE = "depolarize"
    LOSS = "loss"
    POVM = "povm"


REGIMES = {
    NoiseKind.NONE: Regime.NOISELESS,
    NoiseKind.DEPOLARIZE: Regime.DEPOLARIZED,
    NoiseKind.LOSS: Regime.LOSSY,
    NoiseKind.POVM: Regime.POVM_WORSTCASE,
}


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.NONE
    level: float = 0.0

    def __post_init__(self) -> None:
        try:
            kind = NoiseKind(self.kind)
        except ValueError as exc:
            raise NoiseError(f"Unknown noise kind {self.kind!r}") from exc
        level = float(self.level)
        if not np.isfinite(level):
            raise NoiseError(f"Noise level must be finite, got {self.level}")
        if kind in (NoiseKind.DEPOLARIZE, NoiseKind.LOSS) and not 0.0 <= level <= 1.0:
            raise NoiseError(f"{kind.value} level must lie in [0, 1], got {level}")
        if kind is NoiseKind.POVM and level < 0.0:
            raise NoiseError(f"POVM perturbation strength must be ≥ 0, got {level}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "level", level)

    @property
    def regime(self) -> Regime:
        return REGIMES[self.kind]

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(NoiseKind.NONE, 0.0)


@dataclass
class WitnessReport:
    f: float
    terms: Dict[str, float]
    regime: Regime = Regime.NOISELESS
    level: float = 0.0
    q: Optional[float] = None

    def reconstruct(self) -> float:
        t = self.terms
        return t["var_x"] + t["var_p"] - t["comm_a"] - t["comm_b"]

    @property
    def violated(self) -> bool:
        return self.f < 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "f": self.f,
            "terms": {name: self.terms[name] for name in TERM_NAMES},
            "regime": self.regime.value,
            "level": self.level,
            "q": self.q,
        }


def _report(terms: Dict[str, float], regime: Regime, level: float, q: Optional[float]) -> WitnessReport:
    return WitnessReport(f=witness_value(terms), terms=terms, regime=regime, level=level, q=q)


def _operator(value: Union[Observable, CMatrix]) -> CMatrix:
    return value.matrix if isinstance(value, Observable) else as_cmatrix(value)


def f_general(
    rho: CMatrix,
    x_a: Union[Observable, CMatrix],
    p_a: Union[Observable, CMatrix],
    x_b: Union[Observable, CMatrix],
    p_b: Union[Observable, CMatrix],
    split: Tuple[int, int],
) -> WitnessReport:
    """Witness of two modes on a product space ℂ^{d_A} ⊗ ℂ^{d_B}."""

    rho = as_cmatrix(rho)
    dim_a, dim_b = split
    if rho.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionError(f"State of shape {rho.shape} does not match split {split}")
    xa, pa, xb, pb = (_operator(op) for op in (x_a, p_a, x_b, p_b))
    if xa.shape != (dim_a, dim_a) or pa.shape != (dim_a, dim_a):
        raise DimensionError(f"Alice's observables must be {dim_a}×{dim_a}")
    if xb.shape != (dim_b, dim_b) or pb.shape != (dim_b, dim_b):
        raise DimensionError(f"Bob's observables must be {dim_b}×{dim_b}")

    eye_a, eye_b = np.eye(dim_a), np.eye(dim_b)
    XA, PA = np.kron(xa, eye_b), np.kron(pa, eye_b)
    XB, PB = np.kron(eye_a, xb), np.kron(eye_a, pb)

    def mean(op: CMatrix) -> float:
        return expect(rho, op).real

    def covariance(u: CMatrix, v: CMatrix) -> float:
        return mean(u @ v) - mean(u) * mean(v)

    terms = {
        "var_xa": covariance(XA, XA),
        "var_xb": covariance(XB, XB),
        "cov_x": covariance(XA, XB),
        "var_pa": covariance(PA, PA),
        "var_pb": covariance(PB, PB),
        "cov_p": covariance(PA, PB),
        "comm_a": abs(expect(rho, commutator(XA, PA))),
        "comm_b": abs(expect(rho, commutator(XB, PB))),
    }
    terms["var_x"] = terms["var_xa"] + terms["var_xb"] + 2 * terms["cov_x"]
    terms["var_p"] = terms["var_pa"] + terms["var_pb"] - 2 * terms["cov_p"]
    terms = {name: float(terms[name]) for name in TERM_NAMES}
    return _report(terms, Regime.NOISELESS, 0.0, None)


def scenario_moments(scenario: PairScenario, form: WitnessForm) -> PairMoments:
    return pair_moments(form.prepare_state(scenario.sigma), MomentOperators.ideal(scenario))


def noisy_moments(moments: PairMoments, noise: NoiseSpec) -> PairMoments:
    if noise.kind is NoiseKind.NONE:
        return moments
    if noise.kind is NoiseKind.DEPOLARIZE:
        return moments.depolarized(noise.level)
    if noise.kind is NoiseKind.LOSS:
        return moments.lossy(noise.level)
    raise NoiseError("POVM noise has no closed form; use the worst-case functions")


def _warn_if_asymmetric(scenario: PairScenario) -> None:
    if not scenario.is_permutation_symmetric():
        LOGGER.warning("σ is not exchange symmetric; bipartition forms use its symmetrized part")


def _closed_form(scenario: PairScenario, form: WitnessForm, noise: Optional[NoiseSpec]) -> WitnessReport:
    noise = noise or NoiseSpec.none()
    moments = noisy_moments(scenario_moments(scenario, form), noise)
    terms = assemble_terms(moments, form.weights())
    return _report(terms, noise.regime, noise.level, form.q)


def f_iid(scenario: PairScenario) -> WitnessReport:
    return _closed_form(scenario, WitnessForm(WitnessMode.IID), None)


def f_q(scenario: PairScenario, q: float) -> WitnessReport:
    return _closed_form(scenario, WitnessForm(WitnessMode.Q, q), None)


def f_avg(scenario: PairScenario) -> WitnessReport:
    _warn_if_asymmetric(scenario)
    return _closed_form(scenario, WitnessForm(WitnessMode.AVG), None)


def f_iid_noisy(scenario: PairScenario, noise: NoiseSpec) -> WitnessReport:
    return _closed_form(scenario, WitnessForm(WitnessMode.IID), noise)


def f_q_noisy(scenario: PairScenario, q: float, noise: NoiseSpec) -> WitnessReport:
    return _closed_form(scenario, WitnessForm(WitnessMode.Q, q), noise)


def f_avg_noisy(scenario: PairScenario, noise: NoiseSpec) -> WitnessReport:
    _warn_if_asymmetric(scenario)
    return _closed_form(scenario, WitnessForm(WitnessMode.AVG), noise)


def povm_worstcase(
    scenario: PairScenario,
    eps: float,
    form: WitnessForm,
    model: Optional[PerturbationModel] = None,
    evaluator: Optional[WitnessEvaluator] = None,
) -> WitnessReport:
    result = worst_case(scenario, eps, form=form, model=model, evaluator=evaluator)
    return _report(result.terms, Regime.POVM_WORSTCASE, float(eps), form.q)


def f_iid_povm_worstcase(
    scenario: PairScenario, eps: float, model: Optional[PerturbationModel] = None
) -> WitnessReport:
    return povm_worstcase(scenario, eps, WitnessForm(WitnessMode.IID), model)


def f_avg_povm_worstcase(
    scenario: PairScenario, eps: float, model: Optional[PerturbationModel] = None
) -> WitnessReport:
    _warn_if_asymmetric(scenario)
    return povm_worstcase(scenario, eps, WitnessForm(WitnessMode.AVG), model)


def evaluate(
    scenario: PairScenario,
    mode: Union[WitnessMode, str] = WitnessMode.IID,
    noise: Optional[NoiseSpec] = None,
    q: Optional[float] = None,
    model: Optional[PerturbationModel] = None,
) -> WitnessReport:
    """Dispatch on witness form and noise kind."""

    form = WitnessForm(WitnessMode(mode), q)
    noise = noise or NoiseSpec.none()
    if form.mode is not WitnessMode.IID:
        _warn_if_asymmetric(scenario)
    if noise.kind is NoiseKind.POVM:
        return povm_worstcase(scenario, noise.level, form, model)
    return _closed_form(scenario, form, noise)


def check_report(report: WitnessReport) -> bool:
    return abs(report.f - report.reconstruct()) <= RECONSTRUCTION_TOL * max(1.0, abs(report.f))


__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "Regime",
    "WitnessReport",
    "check_report",
    "evaluate",
    "f_avg",
    "f_avg_noisy",
    "f_avg_povm_worstcase",
    "f_general",
    "f_iid",
    "f_iid_noisy",
    "f_iid_povm_worstcase",
    "f_q",
    "f_q_noisy",
    "noisy_moments",
    "povm_worstcase",
    "scenario_moments",
    "WitnessMode",
]
