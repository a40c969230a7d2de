import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osense.sparse import (
    SparseBasis,
    SparseConfig,
    Stage2Config,
    detect_duplicates,
    hard_threshold,
    l3_objective,
    match_planted,
    planted_dictionary,
    random_orthogonal,
    restore_rank,
    sparsify,
    stage1_l3_rotate,
    stage2_l1_refine,
)


def signed_permutation(a, tol=1e-8):
    return np.allclose(np.abs(a).sum(axis=0), 1, atol=tol) and np.allclose(np.abs(a).max(axis=0), 1, atol=tol)


def test_stage1_one_hot_fixed_point():
    k0 = np.eye(12)[:, [3, 7, 1, 9]]
    a, rep = stage1_l3_rotate(k0, seed=0)
    assert signed_permutation(a, 1e-6)
    assert l3_objective(k0 @ a) == pytest.approx(l3_objective(k0), abs=1e-9)
    assert rep["converged"]


@pytest.mark.parametrize("seed", range(5))
def test_stage1_trace_is_non_decreasing(seed):
    s, k0 = planted_dictionary(120, 12, 6, seed)
    a, rep = stage1_l3_rotate(k0, seed=seed)
    trace = np.array(rep["objective"])
    assert np.all(np.diff(trace) >= 0)
    np.testing.assert_allclose(a.T @ a, np.eye(12), atol=1e-10)


def test_stage1_recovers_planted_rotation():
    s, k0 = planted_dictionary(200, 10, 5, 3)
    a, _ = stage1_l3_rotate(k0, seed=1)
    assert match_planted(k0 @ a, s).min() >= 0.99


def test_stage2_leaves_one_hot_alone():
    warm = np.eye(20)[:, [2, 5, 11]]
    out = stage2_l1_refine(warm, warm)
    np.testing.assert_allclose(np.abs(out.columns), warm, atol=1e-12)
    np.testing.assert_allclose(out.l1_norms, 1.0)


def test_stage2_never_worse_than_warm_start():
    rng = np.random.default_rng(4)
    k0, _ = np.linalg.qr(rng.standard_normal((60, 6)))
    out = stage2_l1_refine(k0, k0, Stage2Config(max_iters=500))
    assert np.all(out.l1_norms <= np.abs(k0).sum(axis=0) + 1e-9)
    assert np.all(np.diff(out.report["stage2"]["objective"]) <= 1e-12)


def test_stage2_finds_planted_supports():
    s, k0 = planted_dictionary(150, 10, 5, 7)
    a, _ = stage1_l3_rotate(k0, seed=0)
    out = hard_threshold(stage2_l1_refine(k0, k0 @ a))
    planted = sorted(tuple(np.flatnonzero(s[:, j])) for j in range(10))
    assert sorted(tuple(x) for x in out.supports) == planted


def test_threshold_examples():
    col = np.zeros((10, 1))
    col[0], col[1:4, 0] = 0.9999, 1e-7
    out = hard_threshold(SparseBasis.from_columns(col))
    assert out.supports[0].tolist() == [0]
    flat = hard_threshold(SparseBasis.from_columns(np.ones((8, 1))))
    assert flat.supports[0].tolist() == list(range(8))


def test_threshold_keeps_heisenberg_terms():
    from osense.graphs import sample_connected_er
    from osense.kernel import build_operator_basis
    from osense.symmetry import hamiltonian_coeffs

    g = sample_connected_er(14, 17, 0)
    c = hamiltonian_coeffs(g, build_operator_basis(14))
    c = c + 1e-9 * np.random.default_rng(0).standard_normal(c.size)
    out = hard_threshold(SparseBasis.from_columns(c[:, None]))
    assert len(out.supports[0]) == 34


def test_threshold_rejects_empty_column():
    with pytest.raises(ValueError):
        hard_threshold(SparseBasis(np.zeros((4, 1)), (np.array([], int),), np.zeros(1)))


def test_duplicates():
    a = np.eye(6)[:, [0, 0, 3]]
    assert detect_duplicates(SparseBasis.from_columns(a)) == [(0, 1)]
    b = np.eye(6)[:, [0, 1]]
    assert detect_duplicates(SparseBasis.from_columns(b)) == []


def test_restore_rank_refills_collapsed_column():
    k0 = np.eye(8)[:, :3]
    collapsed = SparseBasis.from_columns(np.eye(8)[:, [0, 0, 2]])
    fixed = restore_rank(collapsed, k0, refine=Stage2Config(max_iters=200))
    assert fixed.report["refilled"] == [1]
    assert fixed.report["rank_after"] == 3
    np.testing.assert_allclose(np.abs(fixed.columns[:, 1]), np.eye(8)[:, 1], atol=1e-9)
    clean = SparseBasis.from_columns(np.eye(8)[:, :3])
    assert restore_rank(clean, k0).report["refilled"] == []


@pytest.mark.parametrize("n_w,d", [(100, 10), (400, 30)])
def test_planted_recovery_rate(n_w, d):
    hits = 0
    for trial in range(20):
        s, k0 = planted_dictionary(n_w, d, min(5, n_w // d), trial)
        out = sparsify(k0, seed=trial)
        hits += match_planted(out.columns, s).min() >= 0.99
        assert out.report["duplicates"] == []
    assert hits >= 19


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 8))
def test_sparsify_preserves_span(seed, d):
    rng = np.random.default_rng(seed)
    k0 = np.linalg.qr(rng.standard_normal((40, d)))[0]
    out = sparsify(k0, SparseConfig(stage2=Stage2Config(max_iters=300)), seed=seed)
    assert out.dim == d
    np.testing.assert_allclose(np.linalg.norm(out.columns, axis=0), 1.0)
    # every output column stays inside span(K0) up to the threshold truncation
    resid = out.columns - k0 @ (k0.T @ out.columns)
    assert np.linalg.norm(resid, axis=0).max() < 1e-2
    assert np.linalg.matrix_rank(out.columns, tol=1e-6) == d


def test_sparsify_is_deterministic():
    _, k0 = planted_dictionary(80, 6, 4, 2)
    a = sparsify(k0, seed=5)
    b = sparsify(k0, seed=5)
    np.testing.assert_array_equal(a.columns, b.columns)


def test_random_orthogonal():
    q = random_orthogonal(7, np.random.default_rng(0))
    np.testing.assert_allclose(q.T @ q, np.eye(7), atol=1e-12)
