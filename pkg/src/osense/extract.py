"""Compress a sparse kernel basis into a small set of algebraic generators.

Candidates are visited from sparsest to densest.  A candidate is kept only
if it is not a linear combination of what the kept generators already
produce (the generators themselves and their pairwise products).
Operators are compared through sketches, i.e. their action on a fixed
set of random sector vectors, so no dense operator matrix is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kernel import OperatorBasis
from .rng import make_rng
from .spin import SectorBasis, coeff_operator_matrix


@dataclass(frozen=True, eq=False)
class OperatorSketch:
    probes: np.ndarray  # (dim, r), shared by every sketch of one run
    images: np.ndarray  # (dim, r), operator applied to each probe
    label: str = ""

    @property
    def flattened(self) -> np.ndarray:
        return self.images.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.images))


def make_probes(sector: SectorBasis, r_probes: int = 16, seed=0) -> np.ndarray:
    if r_probes < 1:
        raise ValueError("need at least one probe")
    rng = make_rng(seed)
    p = rng.standard_normal((sector.dim, r_probes))
    return p / np.linalg.norm(p, axis=0)


def sketch_operator(op: sp.spmatrix, probes: np.ndarray, label: str = "") -> OperatorSketch:
    return OperatorSketch(probes, np.asarray(op @ probes), label)


def sketch_product(a: sp.spmatrix, b: sp.spmatrix, probes: np.ndarray, label: str = "") -> OperatorSketch:
    """Sketch of the product a.b, applied right to left on the probes."""
    return OperatorSketch(probes, np.asarray(a @ (b @ probes)), label)


def represent_in_basis(sketch: OperatorSketch, basis: list[OperatorSketch]) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of ``sketch`` over ``basis`` and the relative misfit.

    An empty basis gives residual 1.  A zero sketch is trivially
    representable and gets residual 0.
    """
    target = sketch.flattened
    tnorm = np.linalg.norm(target)
    if not basis:
        return np.zeros(0), 0.0 if tnorm == 0 else 1.0
    if any(b.probes is not sketch.probes and not np.array_equal(b.probes, sketch.probes) for b in basis):
        raise ValueError("sketches were taken on different probes")
    if tnorm == 0:
        return np.zeros(len(basis)), 0.0
    mat = np.stack([b.flattened for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(mat, target, rcond=None)
    return coef, float(np.linalg.norm(target - mat @ coef) / tnorm)


class _Span:
    """Orthonormal frame of a growing set of flattened sketches."""

    def __init__(self, length: int):
        self.q = np.zeros((length, 0))

    def __len__(self):
        return self.q.shape[1]

    def residual(self, x: np.ndarray) -> float:
        nx = np.linalg.norm(x)
        if nx == 0:
            return 0.0
        r = x - self.q @ (self.q.T @ x)
        r -= self.q @ (self.q.T @ r)  # second pass for stability
        return float(np.linalg.norm(r) / nx)

    def add(self, x: np.ndarray) -> None:
        r = x - self.q @ (self.q.T @ x)
        r -= self.q @ (self.q.T @ r)
        self.q = np.column_stack([self.q, r / np.linalg.norm(r)])


@dataclass(frozen=True, eq=False)
class Generator:
    column_index: int
    coeffs: np.ndarray
    l1: float
    label: str = ""


@dataclass(eq=False)
class GeneratorSet:
    generators: list[Generator] = field(default_factory=list)
    basis_sketches: list[OperatorSketch] = field(default_factory=list)
    rejected: list[tuple[int, float]] = field(default_factory=list)
    partial: bool = False

    def __len__(self):
        return len(self.generators)

    @property
    def coeffs(self) -> np.ndarray:
        if not self.generators:
            return np.zeros((0, 0))
        return np.stack([g.coeffs for g in self.generators], axis=1)

    def to_json(self, basis: OperatorBasis | None = None, describe_tol: float = 1e-3) -> dict:
        out = []
        for g in self.generators:
            entry = {"column_index": g.column_index, "l1": g.l1, "class_label": g.label or None}
            if basis is not None:
                entry["terms"] = [[name, c] for name, c in basis.describe(g.coeffs, describe_tol)]
            out.append(entry)
        return {
            "n_generators": len(self.generators),
            "basis_size": len(self.basis_sketches),
            "partial": self.partial,
            "generators": out,
            "rejected": [[j, r] for j, r in self.rejected],
        }


def _candidates(k) -> tuple[np.ndarray, np.ndarray]:
    cols = np.asarray(getattr(k, "columns", k), dtype=np.float64)
    l1 = np.asarray(getattr(k, "l1_norms", np.abs(cols).sum(axis=0)), dtype=np.float64)
    return cols, l1


def extract_generators(
    k,
    basis: OperatorBasis,
    sector: SectorBasis,
    r_probes: int = 16,
    independence_tol: float = 1e-8,
    basis_cap: int = 512,
    seed=0,
    zero_tol: float = 1e-6,
) -> GeneratorSet:
    """Greedy generator extraction over the columns of ``k`` in ascending l1 (ties by index).

    A candidate is rejected when its sketch lies in the span of the
    current product basis to within ``independence_tol``.  On acceptance
    its own sketch and its products with every kept generator, in both
    orders and including its square, join the product basis when they
    are independent.  Reaching ``basis_cap`` stops the run and marks the
    result partial.

    Operators are scaled to unit normalized trace norm, so a candidate
    whose sketch is below ``zero_tol`` per probe acts as zero on the
    sector (e.g. total magnetization at Sz=0) and is rejected outright.
    """
    cols, l1 = _candidates(k)
    scale = np.sqrt(2.0**basis.n_sites)
    probes = make_probes(sector, r_probes, seed)
    span = _Span(probes.size)
    out = GeneratorSet()
    ops: list[sp.csr_matrix] = []

    def offer(s: OperatorSketch) -> bool:
        if s.norm <= zero_tol * np.sqrt(r_probes):
            return True
        if len(out.basis_sketches) >= basis_cap:
            out.partial = True
            return False
        if span.residual(s.flattened) > independence_tol:
            span.add(s.flattened)
            out.basis_sketches.append(s)
        return True

    order = sorted(range(cols.shape[1]), key=lambda j: (l1[j], j))
    for j in order:
        op = coeff_operator_matrix(cols[:, j] * scale, basis, sector)
        s = sketch_operator(op, probes, f"col{j}")
        res = 0.0 if s.norm <= zero_tol * np.sqrt(r_probes) else span.residual(s.flattened)
        if res <= independence_tol:
            out.rejected.append((j, res))
            continue
        out.generators.append(Generator(j, cols[:, j].copy(), float(l1[j])))
        ops.append(op)
        new = len(ops) - 1
        offer(s)
        for old in range(new + 1):
            if not offer(sketch_product(ops[new], ops[old], probes, f"g{new}*g{old}")):
                break
            if old != new and not offer(sketch_product(ops[old], ops[new], probes, f"g{old}*g{new}")):
                break
        if out.partial:
            break
    return out


def label_generators(gs: GeneratorSet, reference, cos_min: float = 0.999) -> GeneratorSet:
    """Attach the name of the first reference operator each generator matches in |cosine|."""
    labelled = []
    for g in gs.generators:
        name = ""
        for ref in reference:
            c = ref.coeffs
            nc = np.linalg.norm(c)
            if nc > 0 and abs(g.coeffs @ c) / (nc * np.linalg.norm(g.coeffs)) >= cos_min:
                name = ref.name
                break
        labelled.append(Generator(g.column_index, g.coeffs, g.l1, name))
    return GeneratorSet(labelled, gs.basis_sketches, gs.rejected, gs.partial)
