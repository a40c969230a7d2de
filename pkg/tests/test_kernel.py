import numpy as np
import pytest

from osense.eigen import build_hamiltonian, lowest_eigenstates
from osense.graphs import InteractionGraph, assign_couplings, has_swap_symmetry, sample_connected_er
from osense.kernel import (
    build_operator_basis,
    cache_key,
    covariance_matrix,
    expected_size,
    joint_kernel,
    load_kernel_cache,
    phi_matrix,
    sample_covariances,
    save_kernel_cache,
    variance_of,
)
from osense.spin import OpKind, SectorState, enumerate_sector
from osense.symmetry import hamiltonian_coeffs

from dense import dictionary_dense


def asymmetric_graph(n, e, start=0):
    seed = start
    while True:
        g = sample_connected_er(n, e, seed)
        if not has_swap_symmetry(g):
            return g
        seed += 1


def kernel_of(g, n_states=5):
    basis = build_operator_basis(g.n_vertices)
    s = lowest_eigenstates(build_hamiltonian(g), n_states)
    mats = sample_covariances(s, basis)
    return basis, s, mats, joint_kernel(mats)


@pytest.mark.parametrize("n,counts", [(14, (14, 182, 1456)), (4, (4, 12, 16))])
def test_dictionary_counts(n, counts):
    b = build_operator_basis(n)
    one = len(b.family(OpKind.Z))
    two = len(b.family(OpKind.ZZ)) + len(b.family(OpKind.HOP))
    three = len(b.family(OpKind.ZZZ)) + len(b.family(OpKind.HOPZ))
    assert (one, two, three) == counts
    assert b.size == expected_size(n) == sum(counts)


def test_two_site_dictionary():
    b = build_operator_basis(2)
    assert b.labels() == [op.label for op in b.ops]
    assert [(op.kind, op.sites) for op in b.ops] == [
        (OpKind.Z, (0,)), (OpKind.Z, (1,)), (OpKind.ZZ, (0, 1)), (OpKind.HOP, (0, 1))
    ]
    assert expected_size(4) == 32


def test_dictionary_order_is_canonical():
    b = build_operator_basis(5)
    kinds = [op.kind for op in b.ops]
    order = [OpKind.Z, OpKind.ZZ, OpKind.HOP, OpKind.ZZZ, OpKind.HOPZ]
    assert kinds == sorted(kinds, key=order.index)
    for kind in order:
        sites = [b.ops[k].sites for k in b.family(kind)]
        assert sites == sorted(sites)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_covariance_matches_dense(n):
    rng = np.random.default_rng(n)
    basis = build_operator_basis(n)
    sector = enumerate_sector(n, n // 2)
    psi = rng.standard_normal(sector.dim)
    psi /= np.linalg.norm(psi)
    full = np.zeros(2**n)
    full[sector.states] = psi
    ops = [w / np.sqrt(np.trace(w @ w)) for w in dictionary_dense(basis)]
    applied = np.array([w @ full for w in ops])
    mean = applied @ full
    ref = applied @ applied.T - np.outer(mean, mean)
    m = covariance_matrix(SectorState(sector, psi), basis).entries
    np.testing.assert_allclose(m, ref, atol=1e-13)
    np.testing.assert_allclose(phi_matrix(basis, sector, psi), applied[:, sector.states], atol=1e-13)


def test_covariance_is_psd_with_nonnegative_diagonal():
    g = assign_couplings(sample_connected_er(8, 12, 2), "RandomSign", 3)
    _, _, mats, _ = kernel_of(g)
    for m in mats:
        assert np.all(np.diag(m.entries) >= -1e-14)
        assert np.linalg.eigvalsh(m.entries).min() >= -1e-12
        np.testing.assert_array_equal(m.entries, m.entries.T)


def test_rejects_unnormalized_state():
    sector = enumerate_sector(4, 2)
    with pytest.raises(ValueError):
        covariance_matrix(SectorState(sector, np.ones(sector.dim)), build_operator_basis(4))


def test_two_site_singlet_kernel():
    g = InteractionGraph.from_edges(2, [(0, 1)])
    basis, s, mats, k = kernel_of(g, 1)
    assert s.energies[0] == pytest.approx(-3.0)
    assert k.dim == 3
    m = mats[0]
    zz = np.eye(4)[basis.index_of("ZZ", 0, 1)]
    hop = np.eye(4)[basis.index_of("Hop", 0, 1)]
    total_z = (np.eye(4)[0] + np.eye(4)[1]) / np.sqrt(2)
    for c in (zz, hop, total_z):
        assert abs(variance_of(c, m)) < 1e-14
    assert variance_of(np.eye(4)[0], m) > 0.1
    assert k.projector_residual(np.eye(4)[0]) > 0.1


def test_variance_examples():
    g = assign_couplings(sample_connected_er(7, 10, 4), "RandomSign", 5)
    basis, s, mats, k = kernel_of(g)
    assert variance_of(np.zeros(basis.size), mats[0]) == 0.0
    for j in range(k.dim):
        assert max(variance_of(k.columns[:, j], m) for m in mats) <= 1e-10 * k.scale
    c = hamiltonian_coeffs(g, basis)
    assert max(variance_of(c, m) for m in mats) < 1e-12
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(s.basis.dim)
    random_state = covariance_matrix(SectorState(s.basis, psi / np.linalg.norm(psi)), basis)
    assert variance_of(c, random_state) > 1e-3


# five states fix the kernel from N=10 on; the smaller sectors need a few
# more before the sample stops admitting accidental zero-variance directions
@pytest.mark.parametrize("n,e,n_states", [(6, 8, 8), (8, 11, 6), (10, 14, 5)])
def test_dimension_law_on_asymmetric_graphs(n, e, n_states):
    g = asymmetric_graph(n, e)
    basis, _, _, k = kernel_of(g, n_states)
    assert k.dim == n * n + 3
    assert k.reliable
    assert k.projector_residual(hamiltonian_coeffs(g, basis)) < 1e-8
    np.testing.assert_allclose(k.columns.T @ k.columns, np.eye(k.dim), atol=1e-10)


def test_small_sample_excess_shrinks_with_more_states():
    g = asymmetric_graph(8, 11)
    dims = [kernel_of(g, m)[3].dim for m in range(3, 9)]
    assert dims == sorted(dims, reverse=True)
    assert dims[2] > 67 and dims[-1] == 67


def test_gap_report_fields():
    _, _, _, k = kernel_of(asymmetric_graph(6, 8))
    rep = k.gap_report()
    assert rep["reliable"] and rep["last_kept_in"] < rep["threshold"] < rep["first_kept_out"]


def test_joint_kernel_validation():
    with pytest.raises(ValueError):
        joint_kernel([])


def test_cache_round_trip(tmp_path):
    g = asymmetric_graph(6, 8)
    _, s, _, k = kernel_of(g)
    path = tmp_path / "k.bin"
    save_kernel_cache(path, k, s)
    k2, s2 = load_kernel_cache(path, s.basis)
    np.testing.assert_array_equal(k2.columns, k.columns)
    np.testing.assert_array_equal(s2.vectors, s.vectors)
    assert k2.gap_ratio == k.gap_ratio and k2.dim == k.dim
    assert cache_key(g, 3, 5, 1e-8, 1e-10) == cache_key(g, 3, 5, 1e-8, 1e-10)
    assert cache_key(g, 3, 5, 1e-8, 1e-10) != cache_key(g, 3, 6, 1e-8, 1e-10)
