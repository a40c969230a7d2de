"""Sector Heisenberg Hamiltonian and its lowest eigenstates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graphs import InteractionGraph
from .rng import make_rng
from .spin import SectorBasis, SectorState, enumerate_sector

DENSE_MAX_DIM = 4096
RESIDUAL_TOL = 1e-9


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    graph: InteractionGraph
    basis: SectorBasis
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.basis.dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    @property
    def dense(self) -> np.ndarray | None:
        if self.dim > DENSE_MAX_DIM:
            return None
        return self.matrix.toarray()


def build_hamiltonian(g: InteractionGraph, n_up: int | None = None) -> SectorHamiltonian:
    """H = sum_edges J (ZZ + 2 Hop), i.e. J sigma_i . sigma_j restricted to the sector."""
    if n_up is None:
        n_up = g.n_vertices // 2
    basis = enumerate_sector(g.n_vertices, n_up)
    z = basis.spins
    diag = np.zeros(basis.dim)
    rows, cols, vals = [np.arange(basis.dim)], [np.arange(basis.dim)], []
    for (i, j), coupling in zip(g.edges, g.couplings):
        diag += coupling * z[i] * z[j]
        src, dst = basis.hop_pairs(i, j)
        rows.append(dst)
        cols.append(src)
        vals.append(np.full(len(src), 2.0 * coupling))
    vals.insert(0, diag)
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    m.sum_duplicates()
    return SectorHamiltonian(g, basis, m)


@dataclass(frozen=True, eq=False)
class EigenSample:
    basis: SectorBasis
    vectors: np.ndarray  # (dim, n_states), orthonormal columns
    energies: np.ndarray
    degeneracy_extended: bool = False
    residuals: np.ndarray = field(default=None)

    @property
    def n_states(self) -> int:
        return self.vectors.shape[1]

    @property
    def states(self) -> list[SectorState]:
        return [SectorState(self.basis, self.vectors[:, a]) for a in range(self.n_states)]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _degenerate(e_a: float, e_b: float, tol: float) -> bool:
    return abs(e_b - e_a) <= tol * max(1.0, abs(e_a))


def _dense_lowest(h: SectorHamiltonian, m: int):
    dense = h.matrix.toarray()
    if m >= h.dim:
        return sla.eigh(dense)
    return sla.eigh(dense, subset_by_index=[0, m - 1])


def _krylov_lowest(h: SectorHamiltonian, m: int, rng: np.random.Generator, max_iters: int):
    v0 = rng.standard_normal(h.dim)
    try:
        w, v = spla.eigsh(h.matrix, k=m, which="SA", v0=v0, tol=1e-14, maxiter=max_iters)
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(f"Lanczos did not converge within {max_iters} restarts") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    # Rayleigh-Ritz on the returned block restores exact orthonormality inside multiplets.
    q, _ = np.linalg.qr(v)
    small = q.T @ (h.matrix @ q)
    w, u = np.linalg.eigh(0.5 * (small + small.T))
    return w, q @ u


def lowest_eigenstates(
    h: SectorHamiltonian,
    n_requested: int = 5,
    degeneracy_tol: float = 1e-8,
    seed=0,
    max_iters: int = 10_000,
    force_krylov: bool = False,
) -> EigenSample:
    """Lowest ``n_requested`` eigenpairs, widened to close a degenerate multiplet at the edge."""
    if not 1 <= n_requested <= h.dim:
        raise ValueError(f"n_requested must be in [1, {h.dim}], got {n_requested}")
    use_dense = h.dim <= DENSE_MAX_DIM and not force_krylov
    if not use_dense and h.dim < 64:
        use_dense = True  # ARPACK requires k < dim - 1 with slack
    rng = make_rng(seed)
    m = min(h.dim, n_requested + 4)
    while True:
        if use_dense:
            w, v = _dense_lowest(h, m)
        else:
            w, v = _krylov_lowest(h, min(m, h.dim - 2), rng, max_iters)
        n = n_requested
        while n < len(w) and _degenerate(w[n - 1], w[n], degeneracy_tol):
            n += 1
        if n < len(w) or len(w) >= h.dim or (not use_dense and len(w) >= h.dim - 2):
            break
        m = min(h.dim, 2 * m)
    extended = n > n_requested
    vecs = _fix_signs(v[:, :n])
    energies = np.asarray(w[:n], dtype=np.float64)
    residuals = np.linalg.norm(h.matrix @ vecs - vecs * energies, axis=0)
    if np.any(residuals > RESIDUAL_TOL):
        raise EigensolverError(f"eigenpair residual {residuals.max():.2e} exceeds {RESIDUAL_TOL:g}")
    return EigenSample(h.basis, vecs, energies, extended, residuals)
