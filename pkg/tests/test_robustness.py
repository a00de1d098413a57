from math import sqrt

import numpy as np
import pytest

from macroent.core.errors import BracketError, MacroentError, NoiseError
from macroent.core.objects import ime_state, phi_plus_state, rme_state
from macroent.core.robustness import (
    SweepTable,
    find_threshold,
    max_iterations,
    noise_witness,
    presweep_bracket,
    scenario_threshold,
    sweep,
    sweep_noise,
    sweep_q,
)
from macroent.core.witness import f_avg

RME_LAMBDA = (3 - sqrt(1 + 4 * sqrt(2))) / 2


def test_bisection_respects_iteration_bound():
    result = find_threshold(lambda x: x - 0.3, (0.0, 1.0), tol=1e-10, parameter="lambda")
    assert result.critical_value == pytest.approx(0.3, abs=1e-10)
    assert result.iterations <= max_iterations((0.0, 1.0), 1e-10)
    assert result.residual <= 0.5e-10
    lo, hi = result.bracket
    assert lo <= 0.3 <= hi


def test_bisection_needs_sign_change():
    with pytest.raises(BracketError):
        find_threshold(lambda x: x + 1.0, (0.0, 1.0))
    with pytest.raises(BracketError):
        find_threshold(lambda x: float("nan"), (0.0, 1.0))
    with pytest.raises(BracketError):
        find_threshold(lambda x: x, (1.0, 0.0))


def test_presweep_finds_first_crossing():
    assert presweep_bracket(lambda x: x - 0.35, 0.0, 1.0) == pytest.approx((0.3, 0.4))
    with pytest.raises(BracketError):
        presweep_bracket(lambda x: 1.0, 0.0, 1.0)


def test_rme_depolarizing_threshold():
    result = scenario_threshold(rme_state(), "iid", "depolarize")
    assert result.parameter == "lambda"
    assert result.critical_value == pytest.approx(RME_LAMBDA, abs=1e-9)
    assert abs(result.f_at_critical) < 1e-8


def test_rme_loss_threshold_treats_zero_endpoint_as_satisfied():
    result = scenario_threshold(rme_state(), "iid", "loss")
    assert result.parameter == "p"
    assert result.critical_value == pytest.approx(2 - sqrt(2), abs=1e-9)


def test_rme_povm_threshold():
    result = scenario_threshold(rme_state(), "iid", "povm")
    assert result.parameter == "epsilon"
    assert result.critical_value == pytest.approx((sqrt(2) - 1) / (3 * sqrt(2)), abs=2e-4)


def test_ime_thresholds():
    depolarize = scenario_threshold(ime_state(), "avg", "depolarize")
    assert depolarize.critical_value == pytest.approx(0.0572, abs=1e-3)
    assert 0.055 <= depolarize.critical_value <= 0.065
    # Renormalized two-decimal amplitudes move the loss crossing slightly below 0.235.
    loss = scenario_threshold(ime_state(), "avg", "loss")
    assert loss.critical_value == pytest.approx(0.2340, abs=1e-3)
    povm = scenario_threshold(ime_state(), "avg", "povm")
    assert 0.015 <= povm.critical_value <= 0.025


def test_threshold_without_violation_raises():
    with pytest.raises(BracketError):
        scenario_threshold(phi_plus_state(), "iid", "depolarize")


def test_ime_q_sweep_is_mostly_negative():
    table = sweep_q(ime_state(), 101)
    assert len(table) == 101
    assert table.negative_fraction() >= 0.9
    assert table.trapezoid() == pytest.approx(f_avg(ime_state()).f, abs=1e-3)


def test_negative_intervals_interpolate_crossings():
    grid = np.linspace(0.0, 1.0, 5)
    table = SweepTable("q", grid, np.array([1.0, -1.0, -1.0, 1.0, 1.0]))
    assert table.negative_intervals() == [pytest.approx((0.125, 0.625))]
    assert table.negative_fraction() == pytest.approx(0.5)
    summary = table.summary()
    assert summary["rows"] == 5


def test_sweep_table_rejects_unsorted_grid():
    with pytest.raises(MacroentError):
        SweepTable("q", np.array([0.0, 0.5, 0.2]), np.zeros(3))


def test_noise_sweep_is_deterministic_and_matches_threshold():
    scenario = rme_state()
    grid = np.linspace(0.0, 1.0, 21)
    first = sweep_noise(scenario, "depolarize", grid)
    second = sweep_noise(scenario, "depolarize", grid)
    assert np.array_equal(first.values, second.values)
    (lo, hi), = first.negative_intervals()
    assert lo == 0.0
    assert hi == pytest.approx(RME_LAMBDA, abs=0.01)


def test_sweep_dispatch_and_defaults():
    table = sweep(rme_state(), "epsilon", 6)
    assert table.parameter == "epsilon"
    assert table.grid[-1] == pytest.approx(0.5)
    assert sweep(rme_state(), "p", 3).grid.tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(MacroentError):
        sweep(rme_state(), "temperature", 5)
    with pytest.raises(MacroentError):
        sweep(rme_state(), "q", 1)


def test_noise_witness_rejects_none():
    with pytest.raises(NoiseError):
        noise_witness(rme_state(), "none")
