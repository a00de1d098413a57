from math import sqrt

import numpy as np
import pytest

from macroent.core.adversary import (
    Perturbation,
    PerturbationModel,
    WitnessEvaluator,
    admissible_component,
    evaluate_perturbation,
    hermitian_basis,
    measurement_slots,
    sample_perturbation,
    shrink_to_positive,
    worst_case,
)
from macroent.core.errors import NoiseError
from macroent.core.linalg import operator_norm
from macroent.core.moments import WitnessForm, WitnessMode
from macroent.core.objects import ime_state, rme_state, validate_povm
from macroent.core.witness import f_avg_povm_worstcase, f_iid, f_iid_povm_worstcase


def test_hermitian_basis_is_orthonormal():
    basis = hermitian_basis(3)
    gram = np.array([[np.trace(a @ b).real for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(9))


def test_measurement_slots_pick_zero_label_as_dependent():
    slots = {slot.name: slot for slot in measurement_slots(ime_state())}
    a1 = slots["A1"]
    assert a1.labels[a1.dependent] == pytest.approx(0.0)
    assert len(a1.free) == 2
    x = {slot.name: slot for slot in measurement_slots(rme_state())}["A1"]
    assert x.labels[x.dependent] == pytest.approx(-1.0)


def test_perturbed_elements_still_sum_to_identity():
    scenario = ime_state()
    slot = measurement_slots(scenario)[0]
    rng = np.random.default_rng(4)
    components = sample_perturbation(rng, scenario).components[slot.name]
    elements = slot.elements(0.05, components)
    assert np.allclose(sum(elements), np.eye(3))


def test_admissible_component_is_traceless_and_bounded():
    matrix = np.diag([3.0, 1.0, -0.5]).astype(complex)
    component = admissible_component(matrix, traceless=True)
    assert np.trace(component).real == pytest.approx(0.0)
    assert operator_norm(component) <= 1.0 + 1e-12
    assert np.trace(admissible_component(matrix, traceless=False)).real != pytest.approx(0.0)


def test_rme_first_order_slope():
    evaluator = WitnessEvaluator(rme_state(), WitnessForm(WitnessMode.IID))
    _, slope = evaluator.first_order_direction(traceless=True)
    assert slope == pytest.approx(12 * sqrt(2), rel=1e-6)


def test_first_order_worst_case_is_linear_in_eps():
    scenario = rme_state()
    f0 = f_iid(scenario).f
    assert f_iid_povm_worstcase(scenario, 0.0).f == pytest.approx(f0)
    eps_star = (sqrt(2) - 1) / (3 * sqrt(2))
    assert f_iid_povm_worstcase(scenario, eps_star).f == pytest.approx(0.0, abs=1e-8)
    assert f_iid_povm_worstcase(scenario, 0.05).f == pytest.approx(f0 + 0.05 * 12 * sqrt(2), rel=1e-6)


def test_dropping_the_trace_constraint_helps_the_adversary():
    evaluator = WitnessEvaluator(ime_state(), WitnessForm(WitnessMode.AVG))
    _, traceless = evaluator.first_order_direction(traceless=True)
    _, free = evaluator.first_order_direction(traceless=False)
    assert free >= traceless - 1e-9


def test_random_perturbations_never_beat_first_order_optimum():
    scenario = ime_state()
    form = WitnessForm(WitnessMode.AVG)
    best = f_avg_povm_worstcase(scenario, 0.02).f
    rng = np.random.default_rng(2024)
    for _ in range(10):
        perturbation = sample_perturbation(rng, scenario)
        assert evaluate_perturbation(scenario, 0.02, perturbation, form).f <= best + 1e-9


def test_exact_adversary_improves_on_its_seed():
    scenario = rme_state()
    form = WitnessForm(WitnessMode.IID)
    evaluator = WitnessEvaluator(scenario, form)
    seeded, _ = evaluator.first_order_direction(traceless=True)
    model = PerturbationModel(first_order=False, starts=2, seed=9)
    result = worst_case(scenario, 0.05, form, model, evaluator)
    assert result.exact
    assert len(result.per_start) == 2
    assert result.f >= evaluator.f(0.05, seeded) - 1e-9


def test_positivity_keeps_every_element_positive():
    scenario = rme_state()
    model = PerturbationModel(first_order=False, positivity=True, starts=2, seed=1)
    result = worst_case(scenario, 0.2, WitnessForm(WitnessMode.IID), model)
    for slot in measurement_slots(scenario):
        components = result.perturbation.components[slot.name]
        report = validate_povm(slot.povm(0.2, components))
        assert report.positivity_floor >= -1e-9


def test_shrink_to_positive_leaves_small_perturbations_alone():
    scenario = rme_state()
    slot = measurement_slots(scenario)[0]
    component = (np.diag([0.5, -0.5]).astype(complex),)
    assert shrink_to_positive(slot, 0.01, component)[0] is component[0]
    shrunk = shrink_to_positive(slot, 10.0, (np.array([[0, 1], [1, 0]], dtype=complex),))
    assert operator_norm(shrunk[0]) < 1.0


def test_invalid_models_and_strengths():
    with pytest.raises(NoiseError):
        PerturbationModel(first_order=True, positivity=True)
    with pytest.raises(NoiseError):
        worst_case(rme_state(), -0.1)


def test_perturbation_scaling():
    perturbation = Perturbation({"A1": (np.diag([1.0, -1.0]).astype(complex),)})
    assert perturbation.scaled(0.5).max_norm() == pytest.approx(0.5)
