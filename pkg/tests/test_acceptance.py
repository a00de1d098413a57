"""End-to-end checks of the headline numbers."""
from math import cos, pi, sin, sqrt

import pytest

from macroent.core.adversary import PerturbationModel
from macroent.core.objects import ime_state, rme_state
from macroent.core.optimizer import optimize_ime, optimize_rme
from macroent.core.robustness import scenario_threshold, sweep_q
from macroent.core.witness import f_avg, f_avg_povm_worstcase, f_iid, f_iid_povm_worstcase, f_q
from macroent.sim.oracles import multinomial_witness
from macroent.sim.sampling import RunConfig, estimate


def test_rme_values():
    assert f_iid(rme_state()).f == pytest.approx(4 * (1 - sqrt(2)), abs=1e-12)
    assert f_avg(rme_state()).f > 0


def test_ime_q_profile():
    table = sweep_q(ime_state(), 101)
    assert table.negative_fraction() >= 0.9
    assert table.trapezoid() == pytest.approx(f_avg(ime_state()).f, abs=1e-3)


@pytest.mark.slow
def test_optimizer_recovers_rme_optimum():
    result = optimize_rme(2, starts=64, seed=0)
    assert result.best_f == pytest.approx(4 * (1 - sqrt(2)), abs=1e-6)
    schmidt = result.scenario.pure_state().schmidt_coefficients()
    assert schmidt == pytest.approx([cos(pi / 8), sin(pi / 8)], abs=1e-4)


@pytest.mark.slow
def test_phi_plus_never_violates_for_any_observables():
    result = optimize_rme(2, starts=16, seed=0, mode="general", state="phi-plus")
    assert result.best_f >= -1e-6
    assert result.scenario.pure_state().schmidt_coefficients() == pytest.approx([sqrt(0.5)] * 2)


@pytest.mark.slow
def test_qubit_search_finds_averaged_violation():
    # Symmetric qubit states do violate the averaged witness.
    result = optimize_ime(2, starts=32, seed=0)
    assert result.best_f == pytest.approx(-0.38178, abs=1e-4)
    assert result.scenario.is_permutation_symmetric()
    assert sweep_q(result.scenario, 401).trapezoid() == pytest.approx(result.best_f, abs=1e-3)
    for q in (0.2, 0.5, 0.8):
        oracle = multinomial_witness(result.scenario, q, 3).f
        assert oracle == pytest.approx(f_q(result.scenario, q).f, abs=1e-10)
    again = optimize_ime(2, starts=32, seed=0)
    assert again.per_start_bests == result.per_start_bests


@pytest.mark.slow
def test_optimizer_finds_ime_violation():
    result = optimize_ime(3, starts=16, seed=0)
    assert result.best_f <= f_avg(ime_state()).f + 0.02
    assert result.scenario.is_permutation_symmetric()


@pytest.mark.slow
def test_exact_adversary_stays_close_to_first_order_for_small_eps():
    scenario = rme_state()
    eps = 0.01
    linear = f_iid_povm_worstcase(scenario, eps).f
    exact = f_iid_povm_worstcase(scenario, eps, PerturbationModel(first_order=False, starts=4, seed=0)).f
    assert exact == pytest.approx(linear, abs=100 * eps**2)


@pytest.mark.slow
def test_ime_exact_povm_threshold_close_to_first_order():
    first = scenario_threshold(ime_state(), "avg", "povm")
    exact = scenario_threshold(
        ime_state(), "avg", "povm", tol=1e-3, model=PerturbationModel(first_order=False, starts=4, seed=0)
    )
    assert exact.critical_value == pytest.approx(first.critical_value, abs=1e-2)
    assert f_avg_povm_worstcase(ime_state(), 0.0).f == pytest.approx(f_avg(ime_state()).f)


@pytest.mark.slow
def test_monte_carlo_random_bipartition_detects_ime():
    result = estimate(ime_state(), RunConfig(pairs=20, shots=20000, bipartition="random", seed=2024))
    assert result.f_hat + 3 * result.stderr < 0


@pytest.mark.slow
def test_rme_exact_povm_threshold_sits_above_first_order():
    # The second-order terms help the witness, so the exact adversary tolerates more noise.
    first = scenario_threshold(rme_state(), "iid", "povm")
    exact = scenario_threshold(
        rme_state(), "iid", "povm", tol=1e-4, model=PerturbationModel(first_order=False, starts=8, seed=0)
    )
    assert first.critical_value == pytest.approx((sqrt(2) - 1) / (3 * sqrt(2)), abs=2e-4)
    assert exact.critical_value == pytest.approx(0.1049, abs=3e-3)
    assert exact.critical_value > first.critical_value + 3e-3
