from math import sqrt

import numpy as np
import pytest

import config
from macroent.core.errors import MacroentError, NoiseError, SamplingError
from macroent.core.linalg import operator_norm, random_hermitian, random_unitary
from macroent.core.moments import IID_WEIGHTS, MomentOperators, assemble_terms, pair_moments, witness_value
from macroent.core.objects import Observable, PAULI_Z, Povm, ime_state, rme_state
from macroent.core.witness import f_avg, f_iid, f_q
from macroent.sim.sampling import (
    Bipartition,
    RunConfig,
    estimate,
    estimate_f_bipartition,
    estimate_f_iid,
    sample_pair,
)


def _within(estimate_, target, sigmas=5.0, slack=0.02):
    return abs(estimate_.f_hat - target) <= sigmas * estimate_.stderr + slack


def test_bipartition_parsing():
    assert Bipartition.parse("split").kind == "split"
    fixed = Bipartition.parse("fixed:0.25")
    assert fixed.q == pytest.approx(0.25)
    assert str(fixed) == "fixed:0.25"
    with pytest.raises(MacroentError):
        Bipartition.parse("fixed:abc")
    with pytest.raises(MacroentError):
        Bipartition.parse("fixed:1.5")
    with pytest.raises(MacroentError):
        Bipartition.parse("halves")


def test_run_config_validation():
    with pytest.raises(SamplingError):
        RunConfig(pairs=0, shots=100)
    with pytest.raises(SamplingError):
        RunConfig(pairs=1, shots=100, batches=1)
    with pytest.raises(NoiseError):
        RunConfig(pairs=1, shots=100, loss_p=1.2)
    with pytest.raises(SamplingError):
        RunConfig(pairs=1, shots=10, batches=16).batch_sizes()
    sizes = RunConfig(pairs=1, shots=100, batches=8).batch_sizes()
    assert sum(sizes) == 100 and len(sizes) == 8


def test_sample_pair_follows_born_rule():
    scenario = rme_state()
    z = Povm.projective(Observable(PAULI_Z))
    rng = np.random.default_rng(0)
    a, b = sample_pair(scenario.sigma, z, z, rng, size=20000)
    # cos(π/8)|00⟩ − sin(π/8)|11⟩ gives perfectly correlated Z outcomes.
    assert np.all(a == b)
    assert np.mean(a == 1.0) == pytest.approx(np.cos(np.pi / 8) ** 2, abs=0.02)
    single = sample_pair(scenario.sigma, z, z, rng)
    assert isinstance(single, tuple) and len(single) == 2


def test_sample_pair_rejects_invalid_povm():
    bad = Povm((1.0,), (0.5 * np.eye(2),), check=False)
    with pytest.raises(MacroentError):
        sample_pair(rme_state().sigma, bad, bad, np.random.default_rng(0))


def test_split_estimate_matches_closed_form():
    scenario = rme_state()
    result = estimate_f_iid(scenario, RunConfig(pairs=8, shots=4000, seed=1))
    assert _within(result, f_iid(scenario).f)
    assert result.stderr > 0
    assert set(result.terms) >= {"var_x", "var_p", "comm_a", "comm_b"}


def test_noisy_split_estimate_matches_closed_form():
    scenario = rme_state()
    config_ = RunConfig(pairs=4, shots=4000, loss_p=0.2, depolarize_lambda=0.1, seed=3)
    result = estimate(scenario, config_)
    moments = pair_moments(scenario.sigma, MomentOperators.ideal(scenario)).depolarized(0.1).lossy(0.2)
    target = witness_value(assemble_terms(moments, IID_WEIGHTS))
    assert _within(result, target)


def test_fixed_bipartition_estimate_matches_f_q():
    scenario = ime_state()
    result = estimate_f_bipartition(scenario, RunConfig(pairs=4, shots=4000, bipartition="fixed:0.5", seed=7))
    assert _within(result, f_q(scenario, 0.5).f)


def test_random_bipartition_estimate_matches_average():
    scenario = ime_state()
    result = estimate(scenario, RunConfig(pairs=4, shots=6000, bipartition=Bipartition("random"), seed=11))
    assert _within(result, f_avg(scenario).f)


def test_estimators_check_the_bipartition():
    with pytest.raises(SamplingError):
        estimate_f_iid(rme_state(), RunConfig(pairs=1, shots=64, bipartition="random"))
    with pytest.raises(SamplingError):
        estimate_f_bipartition(rme_state(), RunConfig(pairs=1, shots=64))


def test_estimate_is_reproducible_across_thread_counts(monkeypatch):
    scenario = rme_state()
    cfg = RunConfig(pairs=3, shots=640, seed=99, depolarize_lambda=0.2)
    monkeypatch.setattr(config.settings, "threads", 1)
    serial = estimate(scenario, cfg)
    monkeypatch.setattr(config.settings, "threads", 4)
    parallel = estimate(scenario, cfg)
    assert serial.f_hat == parallel.f_hat
    assert serial.stderr == parallel.stderr
    other = estimate(scenario, RunConfig(pairs=3, shots=640, seed=100, depolarize_lambda=0.2))
    assert other.f_hat != serial.f_hat


def test_estimate_serializes_config():
    result = estimate(rme_state(), RunConfig(pairs=1, shots=64, seed=0, batches=4))
    data = result.to_dict()
    assert data["config"]["bipartition"] == "split"
    assert len(data["terms"]["var_x"]) == 2


def _random_projective(rng, dim):
    matrix = random_hermitian(rng, dim)
    return Povm.projective(Observable(matrix / operator_norm(matrix)))


@pytest.mark.parametrize("seed", range(4))
def test_sample_pair_frequencies_match_born_rule_on_random_scenarios(seed):
    rng = np.random.default_rng(seed)
    dim = 2 + seed % 2
    kets = random_unitary(rng, dim * dim)
    sigma = (kets * rng.dirichlet(np.ones(dim * dim))) @ kets.conj().T
    e_a, e_b = _random_projective(rng, dim), _random_projective(rng, dim)
    samples = 100_000
    a, b = sample_pair(sigma, e_a, e_b, rng, size=samples)
    for label_a, element_a in zip(e_a.outcomes, e_a.elements):
        for label_b, element_b in zip(e_b.outcomes, e_b.elements):
            prob = np.trace(sigma @ np.kron(element_a, element_b)).real
            count = int(np.sum((a == label_a) & (b == label_b)))
            assert abs(count - samples * prob) <= 5 * sqrt(samples * prob * (1 - prob)) + 1


def test_sample_pair_product_state_is_uncorrelated():
    rng = np.random.default_rng(5)
    rho = np.diag([0.7, 0.3]).astype(complex)
    tau = np.diag([0.4, 0.6]).astype(complex)
    z = Povm.projective(Observable(PAULI_Z))
    a, b = sample_pair(np.kron(rho, tau), z, z, rng, size=100_000)
    covariance = np.mean(a * b) - np.mean(a) * np.mean(b)
    spread = np.std(a) * np.std(b) / sqrt(a.size)
    assert abs(covariance) <= 4 * spread


@pytest.mark.slow
def test_split_estimate_at_full_size():
    scenario = rme_state()
    result = estimate_f_iid(scenario, RunConfig(pairs=512, shots=4096, seed=2024))
    assert abs(result.f_hat - 4 * (1 - sqrt(2))) < 4 * result.stderr


@pytest.mark.slow
def test_fixed_bipartition_estimate_at_full_size():
    scenario = ime_state()
    result = estimate_f_bipartition(scenario, RunConfig(pairs=256, shots=8192, bipartition="fixed:0.3", seed=2024))
    assert abs(result.f_hat - f_q(scenario, 0.3).f) < 4 * result.stderr


@pytest.mark.slow
def test_random_bipartition_estimate_at_full_size():
    scenario = ime_state()
    result = estimate_f_bipartition(scenario, RunConfig(pairs=256, shots=8192, bipartition="random", seed=2024))
    assert abs(result.f_hat - f_avg(scenario).f) < 4 * result.stderr
    assert result.f_hat < 0


@pytest.mark.slow
def test_stderr_halves_when_shots_quadruple():
    scenario = rme_state()
    small = estimate(scenario, RunConfig(pairs=4, shots=16384, seed=5, batches=256))
    large = estimate(scenario, RunConfig(pairs=4, shots=65536, seed=6, batches=256))
    assert 1.6 <= small.stderr / large.stderr <= 2.5


@pytest.mark.slow
@pytest.mark.parametrize(
    "make_scenario, bipartition, witness",
    [(rme_state, "split", f_iid), (ime_state, "random", f_avg)],
)
def test_estimates_cover_closed_form_across_seeds(make_scenario, bipartition, witness):
    scenario = make_scenario()
    target = witness(scenario).f
    covered = 0
    for seed in range(100):
        result = estimate(scenario, RunConfig(pairs=8, shots=4096, bipartition=bipartition, seed=seed))
        covered += abs(result.f_hat - target) < 4 * result.stderr
    assert covered >= 95
