# -*- coding: utf-8 -*-
import numpy as np
import pytest

from chain_solvers import (build_inter_matrix, build_intra_matrix, chiu_average_reward,
                           chiu_decomposition, gth_steady_state, robb_steady_state)
from conftest import make_instance
from errors import (DimensionError, ModelValidationError, NearAbsorbingStateError, NonCanonicalOrderError,
                    ReducibleChainError)
from mdp_core import PartitionLayout, SparseChain, canonical_reorder
from performance_monitor import OpCounter


# ---- robb_steady_state ----

def test_robb_single_state():
    np.testing.assert_allclose(robb_steady_state(np.array([[1.0]])), [1.0])


def test_robb_two_state():
    pi = robb_steady_state(np.array([[0.5, 0.5], [1.0, 0.0]]))
    np.testing.assert_allclose(pi, [2 / 3, 1 / 3], atol=1e-15)


def test_robb_symmetric_pair():
    pi = robb_steady_state(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-15)


def test_robb_with_self_loop_is_stationary():
    A = np.array([[0.2, 0.5, 0.3],
                  [0.4, 0.25, 0.35],
                  [1.0, 0.0, 0.0]])
    pi = robb_steady_state(A)
    np.testing.assert_allclose(pi @ A, pi, atol=1e-12)
    assert abs(pi.sum() - 1.0) < 1e-12


def test_robb_rejects_backward_arc():
    A = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    with pytest.raises(NonCanonicalOrderError):
        robb_steady_state(A)


def test_robb_rejects_absorbing_state():
    with pytest.raises(NearAbsorbingStateError):
        robb_steady_state(np.array([[0.0, 1.0], [0.0, 1.0]]))


def test_robb_root_must_be_first():
    with pytest.raises(NonCanonicalOrderError):
        robb_steady_state(np.array([[0.5, 0.5], [1.0, 0.0]]), root=1)


def test_robb_operation_count_linear_in_arcs():
    model, layout = make_instance(400, 4, seed=5)
    chain = model.chain(0)
    for r in range(layout.K):
        intra = build_intra_matrix(chain, layout, r)
        counter = OpCounter()
        robb_steady_state(intra, counter=counter)
        assert counter.ops <= 4 * (intra.A.nnz + intra.n)


# ---- gth_steady_state ----

def test_gth_two_state_closed_form():
    pi = gth_steady_state(np.array([[0.5, 0.5], [0.25, 0.75]]))
    np.testing.assert_allclose(pi, [1 / 3, 2 / 3], atol=1e-15)


def test_gth_single_state():
    np.testing.assert_allclose(gth_steady_state(np.array([[1.0]])), [1.0])


def test_gth_f1(f1_chain):
    np.testing.assert_allclose(gth_steady_state(f1_chain.P), [2 / 7, 1 / 7, 2 / 7, 2 / 7], atol=1e-15)


def test_gth_reducible_raises():
    with pytest.raises(ReducibleChainError):
        gth_steady_state(np.eye(2))


def test_gth_rejects_non_square():
    with pytest.raises(DimensionError):
        gth_steady_state(np.ones((2, 3)) / 3)


@pytest.mark.parametrize('seed', range(5))
def test_gth_nonnegative_and_normalized(seed):
    model, _ = make_instance(30, 3, seed=seed)
    pi = gth_steady_state(model.transitions[0])
    assert np.all(pi >= 0)
    assert abs(pi.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(pi @ model.transitions[0].toarray(), pi, atol=1e-12)


# ---- build_intra_matrix / build_inter_matrix ----

def test_intra_matrices_f1(f1_chain, f1):
    _, layout = f1
    np.testing.assert_allclose(build_intra_matrix(f1_chain, layout, 0).to_dense(), [[0.5, 0.5], [1.0, 0.0]])
    np.testing.assert_allclose(build_intra_matrix(f1_chain, layout, 1).to_dense(), [[0.0, 1.0], [1.0, 0.0]])


def test_intra_matrix_closed_partition_folds_root_mass():
    rows = [[(1, 0.5), (2, 0.5)], [(0, 0.3), (1, 0.2), (2, 0.5)], [(0, 1.0)]]
    chain = SparseChain.from_rows(rows, np.zeros(3))
    A = build_intra_matrix(chain, PartitionLayout(np.array([0, 3])), 0).to_dense()
    np.testing.assert_allclose(A, chain.to_dense())


def test_intra_matrix_rows_stochastic(small_instance):
    model, layout = small_instance
    chain = model.chain(1)
    for r in range(layout.K):
        A = build_intra_matrix(chain, layout, r).to_dense()
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(A >= 0)


def test_inter_matrix_f1(f1_chain, f1):
    _, layout = f1
    phis = [np.array([2 / 3, 1 / 3]), np.array([0.5, 0.5])]
    B = build_inter_matrix(f1_chain, layout, phis)
    np.testing.assert_allclose(B, [[8 / 15, 7 / 15], [7 / 20, 13 / 20]], atol=1e-15)


def test_inter_matrix_single_partition():
    rows = [[(1, 0.5), (2, 0.5)], [(0, 0.5), (2, 0.5)], [(0, 1.0)]]
    chain = SparseChain.from_rows(rows, np.zeros(3))
    layout = PartitionLayout(np.array([0, 3]))
    phi = robb_steady_state(build_intra_matrix(chain, layout, 0))
    np.testing.assert_array_equal(build_inter_matrix(chain, layout, [phi]), [[1.0]])


def test_inter_matrix_needs_one_phi_per_partition(f1_chain, f1):
    _, layout = f1
    with pytest.raises(DimensionError):
        build_inter_matrix(f1_chain, layout, [np.array([1.0, 0.0])])


# ---- chiu_average_reward ----

def test_chiu_f1(f1_chain, f1):
    _, layout = f1
    result = chiu_decomposition(f1_chain, layout)
    np.testing.assert_allclose(result.psi, [3 / 7, 4 / 7], atol=1e-15)
    np.testing.assert_allclose(result.pi, [2 / 7, 1 / 7, 2 / 7, 2 / 7], atol=1e-15)
    assert result.rho == pytest.approx(6 / 7, abs=1e-15)


def test_chiu_single_partition_equals_robb():
    rows = [[(1, 0.5), (2, 0.5)], [(0, 0.5), (2, 0.5)], [(0, 1.0)]]
    chain = SparseChain.from_rows(rows, [1.0, 2.0, 3.0])
    pi, _ = chiu_average_reward(chain, PartitionLayout(np.array([0, 3])))
    np.testing.assert_allclose(pi, robb_steady_state(chain.P), atol=1e-15)


def test_chiu_constant_reward(small_instance):
    model, layout = small_instance
    P = model.transitions[0]
    chain = SparseChain(P, np.full(model.n_states, 2.5))
    _, rho = chiu_average_reward(chain, layout)
    assert rho == pytest.approx(2.5, abs=1e-12)


def test_chiu_unknown_intra_solver(f1_chain, f1):
    _, layout = f1
    with pytest.raises(ModelValidationError):
        chiu_average_reward(f1_chain, layout, intra_solver='power')


def test_chiu_fig1b_after_reorder(fig1b):
    model, layout = fig1b
    chain = model.chain(0)
    perm, reordered, _ = canonical_reorder(chain, layout)
    pi, rho = chiu_average_reward(reordered, layout)
    restored = np.empty_like(pi)
    restored[perm] = pi
    expected = gth_steady_state(chain.P)
    np.testing.assert_allclose(restored, expected, atol=1e-12)
    assert rho == pytest.approx(float(expected @ chain.rewards), abs=1e-12)


@pytest.mark.parametrize('n_states, n_partitions, seed', [
    (20, 1, 0), (20, 4, 1), (60, 6, 2), (120, 12, 3), (200, 10, 4), (200, 200, 5),
])
def test_chiu_matches_gth_oracle(n_states, n_partitions, seed):
    model, layout = make_instance(n_states, n_partitions, seed=seed)
    chain = model.chain(0)
    pi_robb, rho_robb = chiu_average_reward(chain, layout, 'robb')
    pi_gth, rho_gth = chiu_average_reward(chain, layout, 'gth')
    oracle = gth_steady_state(chain.P)
    assert np.max(np.abs(pi_robb - oracle)) <= 1e-10
    assert np.max(np.abs(pi_robb - pi_gth)) <= 1e-10
    assert abs(rho_robb - rho_gth) <= 1e-10
    np.testing.assert_allclose(pi_robb @ chain.to_dense(), pi_robb, atol=1e-9)


def test_chiu_parallel_is_bit_identical(small_instance):
    model, layout = small_instance
    chain = model.chain(0)
    serial, _ = chiu_average_reward(chain, layout, max_workers=1)
    threaded, _ = chiu_average_reward(chain, layout, max_workers=4)
    np.testing.assert_array_equal(serial, threaded)


@pytest.mark.slow
def test_chiu_operation_count_scales_linearly():
    counts = []
    for n_states in (20000, 40000):
        model, layout = make_instance(n_states, 20, seed=1)
        counter = OpCounter()
        chiu_average_reward(model.chain(0), layout, counter=counter)
        counts.append(counter.ops)
    assert counts[1] / counts[0] < 2.5
