import json

import numpy as np
import pytest

from macroent.core.errors import MacroentError
from macroent.core.moments import WitnessMode
from macroent.core.objects import ime_state, rme_state
from macroent.core.optimizer import (
    Layout,
    ObservableMode,
    ParamVector,
    StateMode,
    decode,
    encode,
    objective_value,
    optimize,
    optimize_rme,
    phi_plus_ket,
)
from macroent.core.witness import f_avg, f_iid


def test_encoding_reproduces_canonical_scenarios():
    rme = rme_state()
    layout = Layout(2, StateMode.FREE, ObservableMode.SPIN_PLANE, WitnessMode.IID)
    assert objective_value(decode(encode(rme, layout)), WitnessMode.IID) == pytest.approx(f_iid(rme).f)

    ime = ime_state()
    layout = Layout(3, StateMode.SYMMETRIC, ObservableMode.SPIN_PLANE, WitnessMode.AVG)
    decoded = decode(encode(ime, layout))
    assert decoded.is_permutation_symmetric()
    assert objective_value(decoded, WitnessMode.AVG) == pytest.approx(f_avg(ime).f, abs=1e-10)


def test_general_observables_stay_within_unit_norm():
    layout = Layout(3, StateMode.SYMMETRIC, ObservableMode.GENERAL, WitnessMode.AVG)
    values = np.random.default_rng(0).normal(scale=3.0, size=layout.size)
    scenario = decode(ParamVector(values, layout))
    for observable in scenario.observables().values():
        assert np.linalg.norm(observable.matrix, 2) <= 1.0 + 1e-12


def test_layout_sizes():
    assert Layout(2).size == 8 + 4
    assert Layout(3, StateMode.SYMMETRIC).state_size == 12
    assert Layout(2, StateMode.FIXED, fixed_state=phi_plus_ket(2)).state_size == 0
    assert Layout(2, observable_mode=ObservableMode.GENERAL).observable_size == 4


def test_layout_validation():
    with pytest.raises(MacroentError):
        Layout(4)
    with pytest.raises(MacroentError):
        Layout(2, witness=WitnessMode.Q)
    with pytest.raises(MacroentError):
        Layout(2, StateMode.FIXED)
    with pytest.raises(MacroentError):
        ParamVector(np.zeros(3), Layout(2))


def test_phi_plus_in_the_spin_plane_is_never_flagged():
    result = optimize_rme(2, starts=3, seed=5, state="phi-plus")
    assert result.starts == 3
    assert len(result.per_start_bests) == 3
    assert result.best_f >= -1e-9
    assert result.best_f == pytest.approx(min(result.per_start_bests), abs=1e-9)


def test_optimizer_is_reproducible_for_a_seed():
    ket = rme_state().pure_state()
    layout = Layout(2, StateMode.FIXED, ObservableMode.SPIN_PLANE, WitnessMode.IID, fixed_state=ket.amplitudes)
    first = optimize(layout, starts=2, seed=42)
    second = optimize(layout, starts=2, seed=42)
    assert first.per_start_bests == second.per_start_bests
    assert first.best_f < 0


def test_result_serializes_with_scenario():
    result = optimize_rme(2, starts=1, seed=0, state="phi-plus")
    data = json.loads(json.dumps(result.to_dict()))
    assert data["scenario"]["dim"] == 2
    assert "state" in data["scenario"]
    with pytest.raises(MacroentError):
        optimize_rme(2, starts=1, state="ghz")
