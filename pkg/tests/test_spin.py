import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dense import dictionary_dense, pauli, restrict
from osense.kernel import build_operator_basis
from osense.spin import (
    BasisOperator,
    OpKind,
    SectorState,
    apply_basis_array,
    apply_basis_operator,
    apply_coeff_operator,
    coeff_operator_matrix,
    enumerate_sector,
    hs_norm,
    product_state,
)


def test_two_site_sector():
    b = enumerate_sector(2, 1)
    assert b.dim == 2
    assert list(b.states) == [0b01, 0b10]


def test_sector_dimensions():
    assert enumerate_sector(14, 7).dim == 3432
    b = enumerate_sector(4, 0)
    assert b.dim == 1 and b.states[0] == 0


@pytest.mark.parametrize("args", [(3, 4), (25, 3), (4, -1)])
def test_sector_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        enumerate_sector(*args)


@given(n=st.integers(1, 12), data=st.data())
def test_sector_invariants(n, data):
    k = data.draw(st.integers(0, n))
    b = enumerate_sector(n, k)
    assert b.dim == math.comb(n, k)
    assert all(bin(int(s)).count("1") == k for s in b.states)
    assert np.all(np.diff(b.states) > 0)
    for pos in data.draw(st.lists(st.integers(0, b.dim - 1), max_size=5)):
        assert b.index_of(int(b.states[pos])) == pos


def test_single_site_actions():
    b = enumerate_sector(2, 1)
    up_down = product_state(b, 0b01)  # site 0 up, site 1 down
    z0 = apply_basis_operator(BasisOperator(OpKind.Z, (0,), 2), up_down)
    np.testing.assert_array_equal(z0.amplitudes, up_down.amplitudes)
    hop = apply_basis_operator(BasisOperator(OpKind.HOP, (0, 1), 2), up_down)
    np.testing.assert_array_equal(hop.amplitudes, product_state(b, 0b10).amplitudes)


def test_zzz_sign():
    b = enumerate_sector(4, 2)
    s = product_state(b, 0b0101)  # up, down, up, down
    out = apply_basis_operator(BasisOperator(OpKind.ZZZ, (0, 1, 2), 4), s)
    np.testing.assert_array_equal(out.amplitudes, -s.amplitudes)


def test_site_out_of_range():
    with pytest.raises(ValueError):
        BasisOperator(OpKind.ZZ, (0, 5), 4)
    with pytest.raises(ValueError):
        apply_basis_array(BasisOperator(OpKind.Z, (0,), 5), enumerate_sector(4, 2), np.zeros(6))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_hs_norms_match_dense_trace(n):
    basis = build_operator_basis(n)
    for op, mat in zip(basis.ops, dictionary_dense(basis)):
        assert math.isclose(op.hs_norm, math.sqrt(np.trace(mat @ mat)), rel_tol=1e-12)
    assert hs_norm(OpKind.HOP, n) == pytest.approx(math.sqrt(2 ** (n - 1)))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_dictionary_is_hs_orthonormal(n):
    basis = build_operator_basis(n)
    mats = np.stack([m.ravel() / op.hs_norm for op, m in zip(basis.ops, dictionary_dense(basis))])
    np.testing.assert_allclose(mats @ mats.T, np.eye(basis.size), atol=1e-10)


@pytest.mark.parametrize("n,k", [(4, 2), (5, 2), (5, 3), (6, 3)])
def test_basis_operators_match_dense_oracle(n, k):
    basis = build_operator_basis(n)
    sector = enumerate_sector(n, k)
    eye = np.eye(sector.dim)
    for op, mat in zip(basis.ops, dictionary_dense(basis)):
        np.testing.assert_allclose(apply_basis_array(op, sector, eye), restrict(mat, sector.states), atol=1e-12)


def test_coefficient_operator_against_dense():
    basis = build_operator_basis(4)
    sector = enumerate_sector(4, 2)
    c = np.zeros(basis.size)
    i, j = basis.index_of("ZZ", 0, 2), basis.index_of("HopZ", 1, 3, 0)
    c[i], c[j] = 0.3, -1.7
    dense = 0.3 * pauli("ZZ", (0, 2), 4) / 4.0 - 1.7 * pauli("HopZ", (1, 3, 0), 4) / math.sqrt(8)
    np.testing.assert_allclose(coeff_operator_matrix(c, basis, sector).toarray(), restrict(dense, sector.states), atol=1e-13)


def test_coefficient_operator_trivial_cases():
    basis = build_operator_basis(4)
    sector = enumerate_sector(4, 2)
    rng = np.random.default_rng(0)
    s = SectorState(sector, rng.standard_normal(sector.dim))
    assert np.all(apply_coeff_operator(np.zeros(basis.size), basis, s).amplitudes == 0)
    j = basis.index_of("Hop", 0, 3)
    one_hot = np.eye(basis.size)[j]
    direct = apply_basis_operator(basis.ops[j], s).amplitudes / basis.ops[j].hs_norm
    np.testing.assert_allclose(apply_coeff_operator(one_hot, basis, s).amplitudes, direct, atol=1e-14)
    with pytest.raises(ValueError):
        apply_coeff_operator(np.zeros(3), basis, s)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 7))
def test_operators_are_hermitian_on_sector(seed, n):
    rng = np.random.default_rng(seed)
    basis = build_operator_basis(n)
    sector = enumerate_sector(n, n // 2)
    u, v = rng.standard_normal((2, sector.dim))
    op = basis.ops[rng.integers(basis.size)]
    assert u @ apply_basis_array(op, sector, v) == pytest.approx(apply_basis_array(op, sector, u) @ v, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_coefficient_operator_is_linear(seed):
    rng = np.random.default_rng(seed)
    basis = build_operator_basis(5)
    sector = enumerate_sector(5, 2)
    c1, c2 = rng.standard_normal((2, basis.size))
    a, b = rng.standard_normal(2)
    lhs = coeff_operator_matrix(a * c1 + b * c2, basis, sector)
    rhs = a * coeff_operator_matrix(c1, basis, sector) + b * coeff_operator_matrix(c2, basis, sector)
    assert abs(lhs - rhs).max() < 1e-12
