"""Monte Carlo simulation of the collective intensity measurements.

Every shot prepares ``pairs`` independent copies of σ, sends each particle
through the depolarizing channel (a randomly drawn clock-shift unitary) and
the loss channel (a Bernoulli mask, lost particles read 0), measures it and
sums the outcomes on each side.  Four settings are sampled independently:
(A1, B1) for the x quadratures, (A2, B2) for the p quadratures, and the two
commutator observables on their own side.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from math import sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import settings
from macroent.core.errors import InvariantError, MacroentError, NoiseError, SamplingError
from macroent.core.linalg import CMatrix, dagger
from macroent.core.moments import TERM_NAMES, witness_value
from macroent.core.objects import (
    DepolarizingChannel,
    PairScenario,
    Povm,
    commutator_observable,
    validate_povm,
    weyl_operators,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_BATCHES = 16
SETTINGS = ("x", "p", "ka", "kb")


@dataclass(frozen=True)
class Bipartition:
    kind: str = "split"
    q: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in {"split", "fixed", "random"}:
            raise MacroentError(f"Unknown bipartition {self.kind!r}")
        if self.kind == "fixed":
            if self.q is None or not 0.0 <= float(self.q) <= 1.0:
                raise MacroentError(f"Fixed bipartition needs q in [0, 1], got {self.q}")
            object.__setattr__(self, "q", float(self.q))
        elif self.q is not None:
            object.__setattr__(self, "q", None)

    @classmethod
    def parse(cls, text: str) -> "Bipartition":
        text = text.strip().lower()
        if text in {"split", "random"}:
            return cls(text)
        if text.startswith("fixed:"):
            try:
                return cls("fixed", float(text.split(":", 1)[1]))
            except ValueError as exc:
                raise MacroentError(f"Cannot parse bipartition {text!r}") from exc
        raise MacroentError(f"Bipartition must be split, fixed:Q or random, got {text!r}")

    def __str__(self) -> str:
        return f"fixed:{self.q:g}" if self.kind == "fixed" else self.kind


@dataclass(frozen=True)
class RunConfig:
    pairs: int
    shots: int
    loss_p: float = 0.0
    depolarize_lambda: float = 0.0
    bipartition: Bipartition = field(default_factory=Bipartition)
    seed: Optional[int] = None
    batches: int = DEFAULT_BATCHES

    def __post_init__(self) -> None:
        if self.pairs < 1:
            raise SamplingError(f"Need at least one pair per shot, got {self.pairs}")
        if self.shots < 2:
            raise SamplingError(f"Need at least two shots, got {self.shots}")
        if self.batches < 2:
            raise SamplingError(f"Need at least two batches for a standard error, got {self.batches}")
        for name, level in (("loss_p", self.loss_p), ("depolarize_lambda", self.depolarize_lambda)):
            if not 0.0 <= level <= 1.0:
                raise NoiseError(f"{name} must lie in [0, 1], got {level}")
        if isinstance(self.bipartition, str):
            object.__setattr__(self, "bipartition", Bipartition.parse(self.bipartition))

    def batch_sizes(self) -> List[int]:
        if self.shots < 2 * self.batches:
            raise SamplingError(f"{self.shots} shots cannot fill {self.batches} batches of at least 2")
        return [len(chunk) for chunk in np.array_split(np.arange(self.shots), self.batches)]

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["bipartition"] = str(self.bipartition)
        return data


@dataclass
class McEstimate:
    f_hat: float
    stderr: float
    terms: Dict[str, Tuple[float, float]]
    config: RunConfig

    def to_dict(self) -> Dict[str, object]:
        return {
            "f_hat": self.f_hat,
            "stderr": self.stderr,
            "terms": {name: [est, se] for name, (est, se) in self.terms.items()},
            "config": self.config.to_dict(),
        }


def _require_valid(povm: Povm) -> None:
    report = validate_povm(povm)
    if not report.passed:
        raise InvariantError("Invalid POVM: " + "; ".join(report.failures))


def sample_pair(
    sigma: CMatrix,
    e_a: Povm,
    e_b: Povm,
    rng: np.random.Generator,
    size: Optional[int] = None,
):
    """Draw joint outcome labels from tr[σ (E_a ⊗ F_b)]."""

    _require_valid(e_a)
    _require_valid(e_b)
    if sigma.shape != (e_a.dim * e_b.dim, e_a.dim * e_b.dim):
        raise InvariantError(f"σ of shape {sigma.shape} does not match POVM dims {e_a.dim}, {e_b.dim}")
    sigma4 = sigma.reshape(e_a.dim, e_b.dim, e_a.dim, e_b.dim)
    table = np.einsum("ijkl,aki,blj->ab", sigma4, np.array(e_a.elements), np.array(e_b.elements)).real
    cumulative = np.cumsum(np.clip(table, 0.0, None).ravel())
    cumulative /= cumulative[-1]
    draws = rng.random(1 if size is None else size)
    index = np.minimum(np.searchsorted(cumulative, draws, side="right"), cumulative.size - 1)
    labels_a = np.asarray(e_a.outcomes)[index // len(e_b.outcomes)]
    labels_b = np.asarray(e_b.outcomes)[index % len(e_b.outcomes)]
    if size is None:
        return float(labels_a[0]), float(labels_b[0])
    return labels_a, labels_b


@dataclass(frozen=True, eq=False)
class _JointTable:
    cdf: np.ndarray
    labels_first: np.ndarray
    labels_second: np.ndarray


def _joint_table(sigma: CMatrix, first: Povm, second: Povm, unitaries: List[CMatrix]) -> _JointTable:
    """Cumulative outcome tables for every pair of clock-shift unitaries."""

    dim = first.dim
    sigma4 = sigma.reshape(dim, dim, dim, dim)
    # Heisenberg picture: U† E U for every unitary and element
    heis_first = np.array([[dagger(u) @ e @ u for e in first.elements] for u in unitaries])
    heis_second = np.array([[dagger(u) @ e @ u for e in second.elements] for u in unitaries])
    table = np.einsum("ijkl,waki,vblj->wvab", sigma4, heis_first, heis_second).real
    table = np.clip(table, 0.0, None).reshape(len(unitaries), len(unitaries), -1)
    cdf = np.cumsum(table, axis=-1)
    cdf /= cdf[..., -1:]
    return _JointTable(cdf, np.asarray(first.outcomes), np.asarray(second.outcomes))


class _Simulator:
    def __init__(self, scenario: PairScenario, config: RunConfig) -> None:
        self.scenario = scenario
        self.config = config
        dim = scenario.dim
        channel = DepolarizingChannel(dim, config.depolarize_lambda)
        self.weights = channel.weyl_probabilities()
        unitaries = weyl_operators(dim) if config.depolarize_lambda > 0 else [np.eye(dim, dtype=complex)]
        trivial = Povm.trivial(dim)
        povms = {
            "x": (Povm.projective(scenario.a1), Povm.projective(scenario.b1)),
            "p": (Povm.projective(scenario.a2), Povm.projective(scenario.b2)),
            "ka": (Povm.projective(commutator_observable(scenario.a1, scenario.a2)), trivial),
            "kb": (trivial, Povm.projective(commutator_observable(scenario.b1, scenario.b2))),
        }
        self.tables: Dict[Tuple[str, bool, bool], _JointTable] = {}
        for name, (alice, bob) in povms.items():
            for first_alice, second_alice in product((True, False), repeat=2):
                self.tables[(name, first_alice, second_alice)] = _joint_table(
                    scenario.sigma,
                    alice if first_alice else bob,
                    alice if second_alice else bob,
                    unitaries,
                )
        self.unitary_count = len(unitaries)

    def run_batch(self, setting: str, shots: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        cfg = self.config
        pairs = cfg.pairs
        n = shots * pairs
        bipartition = cfg.bipartition
        q_shot: Optional[np.ndarray] = None
        if bipartition.kind == "split":
            alice = np.zeros((n, 2), dtype=bool)
            alice[:, 0] = True
        else:
            if bipartition.kind == "random":
                q_shot = rng.random(shots)
                q_particle = np.repeat(q_shot, pairs)[:, None]
            else:
                q_particle = np.full((n, 1), bipartition.q)
            alice = rng.random((n, 2)) < q_particle

        if self.unitary_count > 1:
            kraus = rng.choice(self.unitary_count, size=(n, 2), p=self.weights)
        else:
            kraus = np.zeros((n, 2), dtype=int)

        values = np.zeros((n, 2))
        for first_alice, second_alice in product((True, False), repeat=2):
            mask = (alice[:, 0] == first_alice) & (alice[:, 1] == second_alice)
            count = int(mask.sum())
            if count == 0:
                continue
            table = self.tables[(setting, first_alice, second_alice)]
            cdf = table.cdf[kraus[mask, 0], kraus[mask, 1]]
            draws = rng.random(count)
            index = np.minimum((cdf <= draws[:, None]).sum(axis=1), cdf.shape[1] - 1)
            width = table.labels_second.size
            values[mask, 0] = table.labels_first[index // width]
            values[mask, 1] = table.labels_second[index % width]

        if cfg.loss_p > 0:
            values = values * (rng.random((n, 2)) >= cfg.loss_p)

        scale = 1.0 / sqrt(pairs) if setting in ("x", "p") else 1.0 / pairs
        alice_sum = np.where(alice, values, 0.0).reshape(shots, pairs * 2).sum(axis=1) * scale
        bob_sum = np.where(alice, 0.0, values).reshape(shots, pairs * 2).sum(axis=1) * scale
        result = {"alice": alice_sum, "bob": bob_sum}
        if q_shot is not None:
            result["q"] = q_shot
        return result


def _centered(values: np.ndarray, q: Optional[np.ndarray]) -> np.ndarray:
    if q is None:
        return values - values.mean()
    # Remove the conditional mean, linear in (q, 1 − q).
    design = np.column_stack([q, 1.0 - q])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return values - design @ coef


def _terms(samples: Dict[str, Dict[str, np.ndarray]]) -> Dict[str, float]:
    x, p = samples["x"], samples["p"]
    xa, xb = _centered(x["alice"], x.get("q")), _centered(x["bob"], x.get("q"))
    pa, pb = _centered(p["alice"], p.get("q")), _centered(p["bob"], p.get("q"))
    terms = {
        "var_xa": float(np.mean(xa * xa)),
        "var_xb": float(np.mean(xb * xb)),
        "cov_x": float(np.mean(xa * xb)),
        "var_pa": float(np.mean(pa * pa)),
        "var_pb": float(np.mean(pb * pb)),
        "cov_p": float(np.mean(pa * pb)),
        "comm_a": abs(float(np.mean(samples["ka"]["alice"]))),
        "comm_b": abs(float(np.mean(samples["kb"]["bob"]))),
    }
    terms["var_x"] = terms["var_xa"] + terms["var_xb"] + 2 * terms["cov_x"]
    terms["var_p"] = terms["var_pa"] + terms["var_pb"] - 2 * terms["cov_p"]
    return {name: terms[name] for name in TERM_NAMES}


def _generators(seed: Optional[int], batches: int) -> Dict[str, List[np.random.Generator]]:
    root = np.random.SeedSequence(seed)
    generators = {}
    for name, child in zip(SETTINGS, root.spawn(len(SETTINGS))):
        generators[name] = [np.random.Generator(np.random.Philox(grand)) for grand in child.spawn(batches)]
    return generators


def _estimate(scenario: PairScenario, config: RunConfig) -> McEstimate:
    sizes = config.batch_sizes()
    simulator = _Simulator(scenario, config)
    generators = _generators(config.seed, config.batches)

    batches: Dict[str, List[Dict[str, np.ndarray]]] = {}
    workers = max(1, min(settings.threads, config.batches))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for name in SETTINGS:
            batches[name] = list(
                pool.map(lambda args: simulator.run_batch(name, *args), zip(sizes, generators[name]))
            )

    per_batch = [_terms({name: batches[name][b] for name in SETTINGS}) for b in range(config.batches)]
    pooled = _terms(
        {
            name: {key: np.concatenate([batch[key] for batch in batches[name]]) for key in batches[name][0]}
            for name in SETTINGS
        }
    )
    root_b = sqrt(config.batches)
    batch_f = np.array([witness_value(terms) for terms in per_batch])
    stderr = float(np.std(batch_f, ddof=1) / root_b)
    if not stderr > 0:
        LOGGER.warning("Batch estimates of f have zero spread; reporting machine epsilon as the error")
        stderr = float(np.finfo(float).eps)
    term_errors = {
        name: (pooled[name], float(np.std([terms[name] for terms in per_batch], ddof=1) / root_b))
        for name in TERM_NAMES
    }
    f_hat = witness_value(pooled)
    LOGGER.info("Monte Carlo estimate f=%.6g ± %.2g over %d shots", f_hat, stderr, config.shots)
    return McEstimate(f_hat=f_hat, stderr=stderr, terms=term_errors, config=config)


def estimate_f_iid(scenario: PairScenario, config: RunConfig) -> McEstimate:
    if config.bipartition.kind != "split":
        raise SamplingError("The IID estimator needs the split bipartition")
    return _estimate(scenario, config)


def estimate_f_bipartition(scenario: PairScenario, config: RunConfig) -> McEstimate:
    if config.bipartition.kind == "split":
        raise SamplingError("The bipartition estimator needs fixed:Q or random")
    return _estimate(scenario, config)


def estimate(scenario: PairScenario, config: RunConfig) -> McEstimate:
    if config.bipartition.kind == "split":
        return estimate_f_iid(scenario, config)
    return estimate_f_bipartition(scenario, config)


__all__ = [
    "Bipartition",
    "McEstimate",
    "RunConfig",
    "estimate",
    "estimate_f_bipartition",
    "estimate_f_iid",
    "sample_pair",
]
