import numpy as np
import pytest

from osense.extract import (
    OperatorSketch,
    extract_generators,
    label_generators,
    make_probes,
    represent_in_basis,
    sketch_operator,
    sketch_product,
)
from osense.graphs import InteractionGraph
from osense.kernel import build_operator_basis
from osense.spin import OpKind, coeff_operator_matrix, enumerate_sector
from osense.symmetry import SymmetryClassOperator, build_intrinsic_set, coeffs_from_terms, hamiltonian_coeffs

TOL = 1e-8


def unit(c):
    return c / np.linalg.norm(c)


@pytest.fixture(scope="module")
def magnetized():
    # one spin flipped up: A is a nonzero scalar here, unlike at Sz=0
    basis = build_operator_basis(4)
    sector = enumerate_sector(4, 3)
    g = InteractionGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    a = build_intrinsic_set(basis)[0].coeffs
    h = hamiltonian_coeffs(g, basis)
    return basis, sector, a, h


def test_candidate_pool_reduces_to_a_and_h(magnetized):
    basis, sector, a, h = magnetized
    # A^2 = N + 2 sum ZZ, so the all-pairs ZZ column stands in for it
    zz = unit(coeffs_from_terms(basis, [(OpKind.ZZ, basis.ops[k].sites, 1.0) for k in basis.family(OpKind.ZZ)]))
    mix = unit(0.6 * a + 0.8 * h)
    pool = np.stack([h, a, zz, mix], axis=1)
    gs = extract_generators(pool, basis, sector, seed=1)
    assert [g.column_index for g in gs.generators] == [1, 0]
    assert sorted(j for j, _ in gs.rejected) == [2, 3]
    assert not gs.partial


def test_single_candidate(magnetized):
    basis, sector, _, h = magnetized
    gs = extract_generators(h[:, None], basis, sector)
    assert len(gs) == 1 and gs.generators[0].column_index == 0
    np.testing.assert_array_equal(gs.coeffs[:, 0], h)


def test_zero_operator_is_never_a_generator():
    basis = build_operator_basis(4)
    sector = enumerate_sector(4, 2)
    a = build_intrinsic_set(basis)[0].coeffs  # vanishes at Sz=0
    gs = extract_generators(a[:, None], basis, sector)
    assert len(gs) == 0 and gs.rejected[0][1] == 0.0


def test_extraction_is_idempotent(magnetized):
    basis, sector, a, h = magnetized
    rng = np.random.default_rng(3)
    pool = np.column_stack([h, a] + [unit(rng.standard_normal(basis.size)) for _ in range(3)])
    once = extract_generators(pool, basis, sector, seed=2)
    again = extract_generators(once.coeffs, basis, sector, seed=2)
    assert len(again) == len(once)
    np.testing.assert_array_equal(again.coeffs, once.coeffs)


def test_linearity_of_sketch():
    basis = build_operator_basis(4)
    sector = enumerate_sector(4, 2)
    probes = make_probes(sector, 16, 0)
    g1 = coeff_operator_matrix(unit(np.arange(basis.size, dtype=float) % 3), basis, sector)
    coef, res = represent_in_basis(sketch_operator(2 * g1, probes), [sketch_operator(g1, probes)])
    assert coef == pytest.approx([2.0]) and res <= 1e-12


def test_noncommuting_product_is_independent():
    basis = build_operator_basis(3)
    sector = enumerate_sector(3, 1)
    probes = make_probes(sector, 16, 0)
    hop01 = coeff_operator_matrix(np.eye(basis.size)[basis.index_of("Hop", 0, 1)], basis, sector)
    hop12 = coeff_operator_matrix(np.eye(basis.size)[basis.index_of("Hop", 1, 2)], basis, sector)
    assert abs(hop01 @ hop12 - hop12 @ hop01).max() > 0.1
    base = [sketch_operator(hop01, probes), sketch_operator(hop12, probes)]
    _, res = represent_in_basis(sketch_product(hop01, hop12, probes), base)
    assert res > TOL


def test_zero_sketch():
    sector = enumerate_sector(4, 2)
    probes = make_probes(sector, 8, 0)
    zero = OperatorSketch(probes, np.zeros_like(probes))
    other = OperatorSketch(probes, probes.copy())
    coef, res = represent_in_basis(zero, [other])
    assert res == 0.0 and np.all(coef == 0)
    assert represent_in_basis(zero, [])[1] == 0.0
    assert represent_in_basis(other, [])[1] == 1.0


def test_probe_mismatch_is_an_error():
    sector = enumerate_sector(4, 2)
    p, q = make_probes(sector, 4, 0), make_probes(sector, 4, 1)
    with pytest.raises(ValueError):
        represent_in_basis(OperatorSketch(p, p), [OperatorSketch(q, q)])


def test_basis_cap_marks_partial(magnetized):
    basis, sector, a, h = magnetized
    rng = np.random.default_rng(0)
    pool = np.column_stack([unit(rng.standard_normal(basis.size)) for _ in range(6)])
    gs = extract_generators(pool, basis, sector, basis_cap=3)
    assert gs.partial and len(gs.basis_sketches) <= 3


def test_labels(magnetized):
    basis, sector, a, h = magnetized
    gs = extract_generators(np.stack([h, a], axis=1), basis, sector)
    ref = [SymmetryClassOperator("H", (), h), SymmetryClassOperator("A", (), a)]
    names = [g.label for g in label_generators(gs, ref).generators]
    assert names == ["A", "H"]
    doc = label_generators(gs, ref).to_json(basis)
    assert doc["n_generators"] == 2 and doc["generators"][0]["class_label"] == "A"


def dense_independent(target, base):
    vecs = [b.toarray().ravel() for b in base]
    t = target.toarray().ravel()
    if np.linalg.norm(t) < 1e-12:
        return False
    if not vecs:
        return True
    mat = np.stack(vecs, axis=1)
    coef, *_ = np.linalg.lstsq(mat, t, rcond=None)
    return np.linalg.norm(t - mat @ coef) / np.linalg.norm(t) > 1e-10


def test_sketch_decisions_match_dense_rank():
    rng = np.random.default_rng(2024)
    agree, disagreements = 0, []
    cache = {}
    for trial in range(1000):
        n = int(rng.integers(3, 6))
        n_up = int(rng.integers(1, n))
        key = (n, n_up)
        if key not in cache:
            cache[key] = (build_operator_basis(n), enumerate_sector(n, n_up))
        basis, sector = cache[key]

        def sparse_op():
            c = np.zeros(basis.size)
            idx = rng.choice(basis.size, size=int(rng.integers(1, 4)), replace=False)
            c[idx] = rng.choice([-1.0, 1.0, 0.5], size=len(idx))
            return coeff_operator_matrix(c, basis, sector)

        base = [sparse_op() for _ in range(int(rng.integers(1, 4)))]
        kind = trial % 3
        if kind == 0:
            target = sum(rng.standard_normal() * b for b in base)
        elif kind == 1:
            target = base[0] @ base[-1]
        else:
            target = sparse_op()
        probes = make_probes(sector, 16, trial)
        sk = [sketch_operator(b, probes) for b in base]
        _, res = represent_in_basis(sketch_operator(target, probes), sk)
        sketch_says = res > TOL
        dense_says = dense_independent(target, base)
        if sketch_says == dense_says:
            agree += 1
        else:
            disagreements.append((sketch_says, dense_says, res))
    assert agree >= 990
    # any disagreement must be a near-tolerance "dependent" call on an independent operator
    for sketch_says, dense_says, res in disagreements:
        assert not sketch_says and dense_says and res > TOL / 10
