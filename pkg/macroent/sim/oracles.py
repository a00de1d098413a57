"""Brute-force reference computations on explicit N-pair states.

These build the full many-particle objects instead of using the single-pair
closed forms, so they are only meant for small N.  Sites are ordered
A₀ B₀ A₁ B₁ …, i.e. site 2k is Alice's particle of pair k and site 2k+1 is
Bob's.
"""
from __future__ import annotations

import logging
from itertools import product
from math import factorial, sqrt
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import comb

from macroent.core.errors import DimensionError, MacroentError
from macroent.core.linalg import CMatrix, commutator, expect, operator_norm, tensor_all
from macroent.core.moments import TERM_NAMES, witness_value
from macroent.core.objects import PairScenario, commutator_observable, symmetrize
from macroent.core.witness import Regime, WitnessReport, f_general

LOGGER = logging.getLogger(__name__)

MAX_DENSITY_DIM = 1024
MAX_VECTOR_DIM = 6561
MAX_LOSS_PAIRS = 4


class NPairState:
    """σ^{⊗N}, stored as a state vector when σ is pure."""

    def __init__(self, scenario: PairScenario, pairs: int) -> None:
        if pairs < 1:
            raise MacroentError(f"Need at least one pair, got {pairs}")
        self.dim = scenario.dim
        self.sites = 2 * pairs
        total = self.dim**self.sites
        ket = scenario.pure_state()
        if ket is not None:
            if total > MAX_VECTOR_DIM:
                raise DimensionError(f"{pairs} pairs need a {total}-dimensional vector")
            self.vector: Optional[np.ndarray] = tensor_all([ket.amplitudes[:, None]] * pairs).ravel()
            self.density: Optional[np.ndarray] = None
        else:
            if total > MAX_DENSITY_DIM:
                raise DimensionError(f"{pairs} mixed pairs need a {total}×{total} density matrix")
            self.vector = None
            self.density = tensor_all([scenario.sigma] * pairs)

    def _apply(self, tensor: np.ndarray, ops: Dict[int, CMatrix]) -> np.ndarray:
        for site, op in ops.items():
            tensor = np.moveaxis(np.tensordot(op, tensor, axes=([1], [site])), 0, site)
        return tensor

    def correlator(self, ops: Dict[int, CMatrix]) -> complex:
        """⟨⊗_s O_s⟩ with identities on the sites not listed."""

        shape = (self.dim,) * self.sites
        if self.vector is not None:
            psi = self.vector.reshape(shape)
            return complex(np.vdot(psi, self._apply(psi, ops)))
        rho = self.density.reshape(shape * 2)
        applied = self._apply(rho, ops).reshape(self.density.shape)
        return complex(np.trace(applied))


def _site_moments(state: NPairState, op_a: CMatrix, op_b: CMatrix) -> Dict[str, np.ndarray]:
    """One- and two-site expectations of op_a on even sites and op_b on odd sites."""

    ops = [op_a if site % 2 == 0 else op_b for site in range(state.sites)]
    first = np.array([state.correlator({site: ops[site]}).real for site in range(state.sites)])
    second = np.zeros((state.sites, state.sites))
    for s in range(state.sites):
        second[s, s] = state.correlator({s: ops[s] @ ops[s]}).real
        for t in range(s + 1, state.sites):
            second[s, t] = second[t, s] = state.correlator({s: ops[s], t: ops[t]}).real
    return {"first": first, "second": second}


def exact_loss_oracle(scenario: PairScenario, pairs: int, p: float) -> WitnessReport:
    """IID witness under particle loss by enumerating all 2^{2N} loss patterns."""

    if not 1 <= pairs <= MAX_LOSS_PAIRS:
        raise MacroentError(f"The loss oracle supports 1 to {MAX_LOSS_PAIRS} pairs, got {pairs}")
    if not 0.0 <= p <= 1.0:
        raise MacroentError(f"Loss probability must lie in [0, 1], got {p}")
    state = NPairState(scenario, pairs)
    x = _site_moments(state, scenario.a1.matrix, scenario.b1.matrix)
    pq = _site_moments(state, scenario.a2.matrix, scenario.b2.matrix)
    k_a = commutator_observable(scenario.a1, scenario.a2).matrix
    k_b = commutator_observable(scenario.b1, scenario.b2).matrix
    k = np.array(
        [state.correlator({site: k_a if site % 2 == 0 else k_b}).real for site in range(state.sites)]
    )
    alice = np.array([site % 2 == 0 for site in range(state.sites)])

    raw: Dict[str, float] = {}

    def accumulate(key: str, value: float, weight: float) -> None:
        raw[key] = raw.get(key, 0.0) + weight * value

    for pattern in product((0, 1), repeat=state.sites):
        kept = np.array(pattern, dtype=float)
        n_kept = int(kept.sum())
        weight = (1 - p) ** n_kept * p ** (state.sites - n_kept)
        if weight == 0.0:
            continue
        mask_a = kept * alice
        mask_b = kept * ~alice
        for label, moments in (("x", x), ("p", pq)):
            first, second = moments["first"], moments["second"]
            accumulate(f"{label}_a", mask_a @ first / sqrt(pairs), weight)
            accumulate(f"{label}_b", mask_b @ first / sqrt(pairs), weight)
            accumulate(f"{label}_aa", mask_a @ second @ mask_a / pairs, weight)
            accumulate(f"{label}_bb", mask_b @ second @ mask_b / pairs, weight)
            accumulate(f"{label}_ab", mask_a @ second @ mask_b / pairs, weight)
        accumulate("k_a", mask_a @ k / pairs, weight)
        accumulate("k_b", mask_b @ k / pairs, weight)

    terms = {
        "var_xa": raw["x_aa"] - raw["x_a"] ** 2,
        "var_xb": raw["x_bb"] - raw["x_b"] ** 2,
        "cov_x": raw["x_ab"] - raw["x_a"] * raw["x_b"],
        "var_pa": raw["p_aa"] - raw["p_a"] ** 2,
        "var_pb": raw["p_bb"] - raw["p_b"] ** 2,
        "cov_p": raw["p_ab"] - raw["p_a"] * raw["p_b"],
        "comm_a": abs(raw["k_a"]),
        "comm_b": abs(raw["k_b"]),
    }
    terms["var_x"] = terms["var_xa"] + terms["var_xb"] + 2 * terms["cov_x"]
    terms["var_p"] = terms["var_pa"] + terms["var_pb"] - 2 * terms["cov_p"]
    terms = {name: float(terms[name]) for name in TERM_NAMES}
    return WitnessReport(f=witness_value(terms), terms=terms, regime=Regime.LOSSY, level=p)


def collective_operator(op: CMatrix, n: int, scale: float = 1.0) -> CMatrix:
    """scale · Σ_i I ⊗ … ⊗ op ⊗ … ⊗ I over n sites."""

    dim = op.shape[0]
    eye = np.eye(dim, dtype=complex)
    total = np.zeros((dim**n, dim**n), dtype=complex)
    for i in range(n):
        total += tensor_all([op if j == i else eye for j in range(n)])
    return scale * total


def permute_sites(rho: CMatrix, dim: int, order: Sequence[int]) -> CMatrix:
    """Reorder the tensor factors of ρ so that new site k is old site ``order[k]``."""

    n = len(order)
    tensor = rho.reshape((dim,) * (2 * n))
    axes = list(order) + [n + index for index in order]
    return tensor.transpose(axes).reshape(rho.shape)


def iid_collective_witness(scenario: PairScenario, pairs: int) -> WitnessReport:
    """General witness on σ^{⊗N} with x_A = Σ A1⁽ⁱ⁾/√N and friends."""

    dim = scenario.dim
    total = dim ** (2 * pairs)
    if total > MAX_DENSITY_DIM:
        raise DimensionError(f"{pairs} pairs need a {total}×{total} density matrix")
    rho = tensor_all([scenario.sigma] * pairs)
    order = [2 * k for k in range(pairs)] + [2 * k + 1 for k in range(pairs)]
    rho = permute_sites(rho, dim, order)
    scale = 1.0 / sqrt(pairs)
    return f_general(
        rho,
        collective_operator(scenario.a1.matrix, pairs, scale),
        collective_operator(scenario.a2.matrix, pairs, scale),
        collective_operator(scenario.b1.matrix, pairs, scale),
        collective_operator(scenario.b2.matrix, pairs, scale),
        (dim**pairs, dim**pairs),
    )


def _pair_type_moments(sigma: CMatrix, a: CMatrix, b: CMatrix) -> Dict[str, Dict[str, float]]:
    """Moments of the per-pair sums s_A, s_B for pairs with both, one or no particle on Alice's side."""

    eye = np.eye(a.shape[0])
    zero = np.zeros_like(sigma)
    sums = {
        "AA": (np.kron(a, eye) + np.kron(eye, a), zero),
        "AB": (np.kron(a, eye), np.kron(eye, b)),
        "BB": (zero, np.kron(b, eye) + np.kron(eye, b)),
    }
    moments = {}
    for kind, (s_a, s_b) in sums.items():
        moments[kind] = {
            "a": expect(sigma, s_a).real,
            "b": expect(sigma, s_b).real,
            "aa": expect(sigma, s_a @ s_a).real,
            "bb": expect(sigma, s_b @ s_b).real,
            "ab": expect(sigma, s_a @ s_b).real,
        }
    return moments


def _configuration_moments(counts: Dict[str, int], pair: Dict[str, Dict[str, float]], pairs: int) -> Dict[str, float]:
    result = {}
    for key in ("a", "b"):
        total = sum(counts[kind] * pair[kind][key] for kind in counts)
        result[key] = total / sqrt(pairs)
    for key, (u, v) in (("aa", ("a", "a")), ("bb", ("b", "b")), ("ab", ("a", "b"))):
        same = sum(counts[kind] * pair[kind][key] for kind in counts)
        sum_u = sum(counts[kind] * pair[kind][u] for kind in counts)
        sum_v = sum(counts[kind] * pair[kind][v] for kind in counts)
        diagonal = sum(counts[kind] * pair[kind][u] * pair[kind][v] for kind in counts)
        result[key] = (same + sum_u * sum_v - diagonal) / pairs
    return result


def multinomial_witness(scenario: PairScenario, q: float, pairs: int) -> WitnessReport:
    """Bipartition witness by enumerating how many pairs land on each side."""

    if not 0.0 <= q <= 1.0:
        raise MacroentError(f"q must lie in [0, 1], got {q}")
    if pairs < 1:
        raise MacroentError(f"Need at least one pair, got {pairs}")
    if not scenario.is_permutation_symmetric():
        LOGGER.warning("σ is not exchange symmetric; enumerating on its symmetrized part")
    sigma = symmetrize(scenario.sigma)
    qb = 1.0 - q
    x_pair = _pair_type_moments(sigma, scenario.a1.matrix, scenario.b1.matrix)
    p_pair = _pair_type_moments(sigma, scenario.a2.matrix, scenario.b2.matrix)
    k_a = expect(sigma, np.kron(commutator_observable(scenario.a1, scenario.a2).matrix, np.eye(scenario.dim))).real
    k_b = expect(sigma, np.kron(np.eye(scenario.dim), commutator_observable(scenario.b1, scenario.b2).matrix)).real

    raw: Dict[str, float] = {}
    for n_a in range(pairs + 1):
        for n_ab in range(pairs - n_a + 1):
            n_b = pairs - n_a - n_ab
            weight = (
                factorial(pairs) / (factorial(n_a) * factorial(n_ab) * factorial(n_b))
                * q ** (2 * n_a) * (2 * q * qb) ** n_ab * qb ** (2 * n_b)
            )
            if weight == 0.0:
                continue
            counts = {"AA": n_a, "AB": n_ab, "BB": n_b}
            for label, pair in (("x", x_pair), ("p", p_pair)):
                for key, value in _configuration_moments(counts, pair, pairs).items():
                    raw[f"{label}_{key}"] = raw.get(f"{label}_{key}", 0.0) + weight * value
            raw["k_a"] = raw.get("k_a", 0.0) + weight * (2 * n_a + n_ab) * k_a / pairs
            raw["k_b"] = raw.get("k_b", 0.0) + weight * (2 * n_b + n_ab) * k_b / pairs

    terms = {
        "var_xa": raw["x_aa"] - raw["x_a"] ** 2,
        "var_xb": raw["x_bb"] - raw["x_b"] ** 2,
        "cov_x": raw["x_ab"] - raw["x_a"] * raw["x_b"],
        "var_pa": raw["p_aa"] - raw["p_a"] ** 2,
        "var_pb": raw["p_bb"] - raw["p_b"] ** 2,
        "cov_p": raw["p_ab"] - raw["p_a"] * raw["p_b"],
        "comm_a": abs(raw["k_a"]),
        "comm_b": abs(raw["k_b"]),
    }
    terms["var_x"] = terms["var_xa"] + terms["var_xb"] + 2 * terms["cov_x"]
    terms["var_p"] = terms["var_pa"] + terms["var_pb"] - 2 * terms["cov_p"]
    terms = {name: float(terms[name]) for name in TERM_NAMES}
    return WitnessReport(f=witness_value(terms), terms=terms, regime=Regime.NOISELESS, q=q)


def configuration_count(pairs: int) -> int:
    """Number of (N_A, N_AB, N_B) configurations."""

    return int(comb(pairs + 2, 2, exact=True))


def collective_commutator_norm(a: CMatrix, b: CMatrix, n: int, alpha: float = 0.5) -> float:
    """‖[n^{-α} Σ aᵢ, n^{-α} Σ bᵢ]‖ = n^{1−2α} ‖−i[a, b]‖."""

    if n < 1:
        raise MacroentError(f"n must be positive, got {n}")
    return n ** (1 - 2 * alpha) * operator_norm(-1j * commutator(a, b))


def brute_force_commutator_norm(a: CMatrix, b: CMatrix, n: int, alpha: float = 0.5) -> float:
    dim = a.shape[0]
    if dim**n > MAX_DENSITY_DIM:
        raise DimensionError(f"{n} sites of dim {dim} are too many for the explicit commutator")
    scale = n ** (-alpha)
    big_a = collective_operator(a, n, scale)
    big_b = collective_operator(b, n, scale)
    return operator_norm(-1j * commutator(big_a, big_b))


__all__ = [
    "NPairState",
    "brute_force_commutator_norm",
    "collective_commutator_norm",
    "collective_operator",
    "configuration_count",
    "exact_loss_oracle",
    "iid_collective_witness",
    "multinomial_witness",
    "permute_sites",
]
