import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macroent.core.errors import DimensionError, InvariantError
from macroent.core.linalg import (
    eig_hermitian,
    expect,
    hermitian_from_params,
    hermitian_to_params,
    is_hermitian,
    operator_norm,
    partial_trace,
    random_hermitian,
    swap_operator,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _random_density(rng, dim):
    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = ginibre @ ginibre.conj().T
    return rho / np.trace(rho)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=st.sampled_from([2, 3]))
def test_partial_trace_of_product_returns_factor(seed, dim):
    rng = np.random.default_rng(seed)
    rho_a = _random_density(rng, dim)
    rho_b = _random_density(rng, dim)
    joint = np.kron(rho_a, rho_b)
    assert np.allclose(partial_trace(joint, [dim, dim], [0]), rho_a)
    assert np.allclose(partial_trace(joint, [dim, dim], [1]), rho_b)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=st.sampled_from([2, 3, 4]))
def test_hermitian_parameterization_is_invertible(seed, dim):
    matrix = random_hermitian(np.random.default_rng(seed), dim)
    params = hermitian_to_params(matrix)
    assert params.shape == (dim * dim,)
    assert np.allclose(hermitian_from_params(params, dim), matrix)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_eigensystem_reconstructs_and_merges_degenerate_levels(seed):
    rng = np.random.default_rng(seed)
    matrix = random_hermitian(rng, 3)
    system = eig_hermitian(matrix)
    assert np.allclose(system.reconstruct(), matrix)
    assert np.allclose(sum(system.projectors), np.eye(3))
    assert list(system.eigenvalues) == sorted(system.eigenvalues, reverse=True)


def test_degenerate_spectrum_gives_one_projector_per_level():
    system = eig_hermitian(np.diag([1.0, 1.0, -1.0]))
    assert len(system) == 2
    assert np.isclose(np.trace(system.projectors[0]).real, 2.0)


def test_partial_trace_keeps_middle_subsystem():
    rng = np.random.default_rng(7)
    factors = [_random_density(rng, 2) for _ in range(3)]
    joint = np.kron(np.kron(factors[0], factors[1]), factors[2])
    assert np.allclose(partial_trace(joint, [2, 2, 2], [1]), factors[1])
    assert np.allclose(partial_trace(joint, [2, 2, 2], [0, 2]), np.kron(factors[0], factors[2]))


def test_partial_trace_rejects_mismatched_dims():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6) / 6, [2, 2], [0])


def test_expect_requires_unit_trace():
    with pytest.raises(InvariantError):
        expect(np.eye(2), np.eye(2))
    assert expect(np.eye(2) / 2, np.diag([1.0, -1.0])) == pytest.approx(0.0)


def test_swap_operator_exchanges_factors():
    rng = np.random.default_rng(3)
    a, b = random_hermitian(rng, 3), random_hermitian(rng, 3)
    swap = swap_operator(3)
    assert np.allclose(swap @ np.kron(a, b) @ swap, np.kron(b, a))
    assert is_hermitian(swap)
    assert operator_norm(swap) == pytest.approx(1.0)
