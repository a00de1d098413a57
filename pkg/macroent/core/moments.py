"""Single-pair moments and the quadratic witness polynomial built on them.

Every witness form (IID, fixed bipartition, averaged bipartition) is a fixed
linear combination of first moments, second moments, same-pair correlators,
cross correlators and commutator means of one pair.  Only the weights differ,
so the forms share :func:`assemble_terms` and noise acts on the moments.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional

import numpy as np

from .errors import MacroentError
from .linalg import CMatrix, expect, partial_trace
from .objects import PairScenario, commutator_observable, symmetrize

SLOT_NAMES = ("A1", "A2", "B1", "B2", "KA", "KB")
QUADRATURE_NAMES = ("A1", "A2", "B1", "B2")
PARTICLE = {"A1": 0, "A2": 0, "KA": 0, "B1": 1, "B2": 1, "KB": 1}
CROSS_PAIRS = {"x": ("A1", "B1"), "p": ("A2", "B2")}
TERM_NAMES = (
    "var_xa",
    "var_xb",
    "cov_x",
    "var_pa",
    "var_pb",
    "cov_p",
    "var_x",
    "var_p",
    "comm_a",
    "comm_b",
)


class WitnessMode(str, Enum):
    IID = "iid"
    Q = "q"
    AVG = "avg"


@dataclass(frozen=True)
class SideWeights:
    second: float
    same_pair: float
    mean_sq: float
    comm: float


@dataclass(frozen=True)
class FormWeights:
    a: SideWeights
    b: SideWeights
    corr: float
    mean_prod: float


IID_WEIGHTS = FormWeights(
    a=SideWeights(1.0, 0.0, 1.0, 1.0),
    b=SideWeights(1.0, 0.0, 1.0, 1.0),
    corr=1.0,
    mean_prod=1.0,
)

# ∫₀¹ of the bipartition weights below
AVERAGED_WEIGHTS = FormWeights(
    a=SideWeights(1.0, 2.0 / 3.0, 4.0 / 3.0, 1.0),
    b=SideWeights(1.0, 2.0 / 3.0, 4.0 / 3.0, 1.0),
    corr=1.0 / 3.0,
    mean_prod=2.0 / 3.0,
)


def bipartition_weights(q: float) -> FormWeights:
    qb = 1.0 - q
    return FormWeights(
        a=SideWeights(2 * q, 2 * q * q, 4 * q * q, 2 * q),
        b=SideWeights(2 * qb, 2 * qb * qb, 4 * qb * qb, 2 * qb),
        corr=2 * q * qb,
        mean_prod=4 * q * qb,
    )


@dataclass(frozen=True)
class WitnessForm:
    """Which witness to assemble: IID, fixed q or the q-average."""

    mode: WitnessMode
    q: Optional[float] = None

    def __post_init__(self) -> None:
        mode = WitnessMode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is WitnessMode.Q:
            if self.q is None or not np.isfinite(self.q) or not 0.0 <= self.q <= 1.0:
                raise MacroentError(f"Bipartition probability q must lie in [0, 1], got {self.q}")
            object.__setattr__(self, "q", float(self.q))
        else:
            object.__setattr__(self, "q", None)

    def weights(self) -> FormWeights:
        if self.mode is WitnessMode.IID:
            return IID_WEIGHTS
        if self.mode is WitnessMode.AVG:
            return AVERAGED_WEIGHTS
        return bipartition_weights(self.q)

    def prepare_state(self, sigma: CMatrix) -> CMatrix:
        # A random assignment inside a split pair sees the exchange-averaged state.
        if self.mode is WitnessMode.IID:
            return sigma
        return symmetrize(sigma)


@dataclass(frozen=True, eq=False)
class MomentOperators:
    """Operators whose means are the measured first and second moments."""

    first: Dict[str, CMatrix]
    second: Dict[str, CMatrix]

    @property
    def dim(self) -> int:
        return int(self.first["A1"].shape[0])

    @classmethod
    def ideal(cls, scenario: PairScenario) -> "MomentOperators":
        observables = scenario.observables()
        first = {name: obs.matrix for name, obs in observables.items()}
        second = {name: obs.matrix @ obs.matrix for name, obs in observables.items()}
        first["KA"] = commutator_observable(scenario.a1, scenario.a2).matrix
        first["KB"] = commutator_observable(scenario.b1, scenario.b2).matrix
        return cls(first=first, second=second)

    def with_slot(
        self, name: str, first: CMatrix, second: Optional[CMatrix] = None
    ) -> "MomentOperators":
        new_first = dict(self.first)
        new_first[name] = first
        new_second = dict(self.second)
        if second is not None:
            new_second[name] = second
        return MomentOperators(first=new_first, second=new_second)


@dataclass(frozen=True)
class PairMoments:
    dim: int
    first: Dict[str, float]
    second: Dict[str, float]
    same_pair: Dict[str, float]
    cross: Dict[str, float]
    trace_first: Dict[str, float] = field(default_factory=dict)
    trace_second: Dict[str, float] = field(default_factory=dict)

    def depolarized(self, lam: float) -> "PairMoments":
        keep = 1.0 - lam
        tf, ts = self.trace_first, self.trace_second
        first = {name: keep * value + lam * tf[name] for name, value in self.first.items()}
        second = {name: keep * value + lam * ts[name] for name, value in self.second.items()}
        same_pair = {
            name: keep**2 * value + 2 * keep * lam * self.first[name] * tf[name] + lam**2 * tf[name] ** 2
            for name, value in self.same_pair.items()
        }
        cross = {}
        for key, (a, b) in CROSS_PAIRS.items():
            cross[key] = (
                keep**2 * self.cross[key]
                + keep * lam * (self.first[a] * tf[b] + tf[a] * self.first[b])
                + lam**2 * tf[a] * tf[b]
            )
        return replace(self, first=first, second=second, same_pair=same_pair, cross=cross)

    def lossy(self, p: float) -> "PairMoments":
        keep = 1.0 - p
        return replace(
            self,
            first={name: keep * value for name, value in self.first.items()},
            second={name: keep * value for name, value in self.second.items()},
            same_pair={name: keep**2 * value for name, value in self.same_pair.items()},
            cross={name: keep**2 * value for name, value in self.cross.items()},
        )


def pair_moments(sigma: CMatrix, ops: MomentOperators) -> PairMoments:
    """Moments of ``ops`` on σ, A operators on particle 1 and B operators on particle 2.

    ``same_pair`` places the operator on both particles, which is only
    meaningful for exchange-symmetric σ.
    """

    dim = ops.dim
    marginals = (
        partial_trace(sigma, [dim, dim], [0]),
        partial_trace(sigma, [dim, dim], [1]),
    )

    def mean(name: str, op: CMatrix) -> float:
        return expect(marginals[PARTICLE[name]], op).real

    first = {name: mean(name, ops.first[name]) for name in SLOT_NAMES}
    second = {name: mean(name, ops.second[name]) for name in QUADRATURE_NAMES}
    same_pair = {
        name: expect(sigma, np.kron(ops.first[name], ops.first[name])).real for name in QUADRATURE_NAMES
    }
    cross = {key: expect(sigma, np.kron(ops.first[a], ops.first[b])).real for key, (a, b) in CROSS_PAIRS.items()}
    trace_first = {name: float(np.trace(ops.first[name]).real) / dim for name in SLOT_NAMES}
    trace_second = {name: float(np.trace(ops.second[name]).real) / dim for name in QUADRATURE_NAMES}
    return PairMoments(
        dim=dim,
        first=first,
        second=second,
        same_pair=same_pair,
        cross=cross,
        trace_first=trace_first,
        trace_second=trace_second,
    )


def _variance(m: PairMoments, name: str, w: SideWeights) -> float:
    return w.second * m.second[name] + w.same_pair * m.same_pair[name] - w.mean_sq * m.first[name] ** 2


def _covariance(m: PairMoments, key: str, weights: FormWeights) -> float:
    a, b = CROSS_PAIRS[key]
    return weights.corr * m.cross[key] - weights.mean_prod * m.first[a] * m.first[b]


def assemble_terms(m: PairMoments, weights: FormWeights) -> Dict[str, float]:
    terms = {
        "var_xa": _variance(m, "A1", weights.a),
        "var_xb": _variance(m, "B1", weights.b),
        "cov_x": _covariance(m, "x", weights),
        "var_pa": _variance(m, "A2", weights.a),
        "var_pb": _variance(m, "B2", weights.b),
        "cov_p": _covariance(m, "p", weights),
        "comm_a": weights.a.comm * abs(m.first["KA"]),
        "comm_b": weights.b.comm * abs(m.first["KB"]),
    }
    terms["var_x"] = terms["var_xa"] + terms["var_xb"] + 2 * terms["cov_x"]
    terms["var_p"] = terms["var_pa"] + terms["var_pb"] - 2 * terms["cov_p"]
    return {name: float(terms[name]) for name in TERM_NAMES}


def witness_value(terms: Dict[str, float]) -> float:
    return terms["var_x"] + terms["var_p"] - terms["comm_a"] - terms["comm_b"]


__all__ = [
    "AVERAGED_WEIGHTS",
    "FormWeights",
    "IID_WEIGHTS",
    "MomentOperators",
    "PairMoments",
    "QUADRATURE_NAMES",
    "SLOT_NAMES",
    "SideWeights",
    "TERM_NAMES",
    "WitnessForm",
    "WitnessMode",
    "assemble_terms",
    "bipartition_weights",
    "pair_moments",
    "witness_value",
]
