"""Operator dictionary, per-state covariance matrices and the joint null space."""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .spin import BasisOperator, OpKind, SectorBasis, SectorState

FAMILY_ORDER = (OpKind.Z, OpKind.ZZ, OpKind.HOP, OpKind.ZZZ, OpKind.HOPZ)
NORM_TOL = 1e-10
GAP_MIN = 1e3


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Ordered dictionary: all Z, then ZZ, Hop, ZZZ, HopZ, each lexicographic in its sites."""

    n_sites: int
    ops: tuple[BasisOperator, ...]

    @property
    def size(self) -> int:
        return len(self.ops)

    def __len__(self):
        return len(self.ops)

    @cached_property
    def norms(self) -> np.ndarray:
        return np.array([op.hs_norm for op in self.ops])

    @cached_property
    def _index(self) -> dict:
        return {(op.kind, op.sites): k for k, op in enumerate(self.ops)}

    def index_of(self, kind, *sites: int) -> int:
        return self._index[(OpKind(kind), tuple(sites))]

    @cached_property
    def kinds(self) -> np.ndarray:
        return np.array([op.kind.value for op in self.ops])

    def family(self, kind) -> np.ndarray:
        """Dictionary indices of one operator family, in canonical order."""
        return np.flatnonzero(self.kinds == OpKind(kind).value)

    def labels(self) -> list[str]:
        return [op.label for op in self.ops]

    def describe(self, c: np.ndarray, tol: float = 1e-8) -> list[tuple[str, float]]:
        """(label, coefficient) for entries above ``tol`` times the largest."""
        c = np.asarray(c)
        cut = tol * np.max(np.abs(c)) if c.size else 0.0
        return [(self.ops[k].label, float(c[k])) for k in np.flatnonzero(np.abs(c) > cut)]


def expected_size(n_sites: int) -> int:
    n = n_sites
    return n + 2 * math.comb(n, 2) + math.comb(n, 3) + math.comb(n, 2) * (n - 2)


def build_operator_basis(n_sites: int) -> OperatorBasis:
    if not 2 <= n_sites <= 24:
        raise ValueError(f"n_sites must be in [2, 24], got {n_sites}")
    n = n_sites
    pairs = list(itertools.combinations(range(n), 2))
    ops = [BasisOperator(OpKind.Z, (i,), n) for i in range(n)]
    ops += [BasisOperator(OpKind.ZZ, p, n) for p in pairs]
    ops += [BasisOperator(OpKind.HOP, p, n) for p in pairs]
    ops += [BasisOperator(OpKind.ZZZ, t, n) for t in itertools.combinations(range(n), 3)]
    ops += [BasisOperator(OpKind.HOPZ, (i, j, k), n) for i, j in pairs for k in range(n) if k not in (i, j)]
    return OperatorBasis(n, tuple(ops))


def phi_matrix(basis: OperatorBasis, sector: SectorBasis, psi: np.ndarray) -> np.ndarray:
    """Rows are phi_i = W_i psi / hs_norm_i, shape (N_W, dim)."""
    if basis.n_sites != sector.n_sites:
        raise ValueError("dictionary and sector disagree on n_sites")
    psi = np.asarray(psi, dtype=np.float64)
    z = sector.spins
    sites = [op.sites for op in basis.ops]
    out = np.empty((basis.size, sector.dim))

    idx = basis.family(OpKind.Z)
    out[idx] = z[[sites[k][0] for k in idx]] * psi

    idx = basis.family(OpKind.ZZ)
    a, b = np.array([sites[k] for k in idx]).T
    out[idx] = z[a] * z[b] * psi

    idx = basis.family(OpKind.ZZZ)
    if len(idx):
        a, b, c = np.array([sites[k] for k in idx]).T
        out[idx] = z[a] * z[b] * z[c] * psi

    hop_idx = basis.family(OpKind.HOP)
    pair_row = {}
    hop = np.zeros((len(hop_idx), sector.dim))
    for r, k in enumerate(hop_idx):
        i, j = sites[k]
        src, dst = sector.hop_pairs(i, j)
        hop[r, dst] = psi[src]
        pair_row[(i, j)] = r
    out[hop_idx] = hop

    idx = basis.family(OpKind.HOPZ)
    if len(idx):
        rows = [pair_row[sites[k][:2]] for k in idx]
        ks = [sites[k][2] for k in idx]
        out[idx] = hop[rows] * z[ks]

    out /= basis.norms[:, None]
    return out


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    entries: np.ndarray
    state_index: int = 0


def covariance_matrix(state: SectorState, basis: OperatorBasis, state_index: int = 0) -> CovarianceMatrix:
    """M_ij = <W_i psi | W_j psi> - <W_i><W_j> over the unit-norm dictionary."""
    psi = state.amplitudes
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm {np.linalg.norm(psi):.12f})")
    phi = phi_matrix(basis, state.basis, psi)
    mean = phi @ psi
    m = phi @ phi.T
    m -= np.outer(mean, mean)
    m = 0.5 * (m + m.T)
    return CovarianceMatrix(m, state_index)


def variance_of(c: np.ndarray, m: CovarianceMatrix) -> float:
    c = np.asarray(c, dtype=np.float64)
    return float(c @ m.entries @ c)


@dataclass(frozen=True, eq=False)
class KernelBasis:
    columns: np.ndarray  # (N_W, D_K), orthonormal
    spectrum: np.ndarray  # ascending eigenvalues of sum_alpha M^alpha
    threshold: float
    gap_ratio: float

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @property
    def scale(self) -> float:
        return float(self.spectrum[-1])

    @property
    def reliable(self) -> bool:
        return self.gap_ratio >= GAP_MIN

    def projector_residual(self, c: np.ndarray) -> float:
        """||(I - K0 K0^T) c|| / ||c||."""
        c = np.asarray(c, dtype=np.float64)
        r = c - self.columns @ (self.columns.T @ c)
        return float(np.linalg.norm(r) / np.linalg.norm(c))

    def gap_report(self, width: int = 3) -> dict:
        d = self.dim
        lo, hi = max(0, d - width), min(len(self.spectrum), d + width)
        return {
            "threshold": self.threshold,
            "top_eigenvalue": self.scale,
            "last_kept_in": float(self.spectrum[d - 1]) if d else None,
            "first_kept_out": float(self.spectrum[d]) if d < len(self.spectrum) else None,
            "gap_ratio": self.gap_ratio,
            "reliable": self.reliable,
            "relative_spectrum_near_threshold": [float(x / self.scale) for x in self.spectrum[lo:hi]],
        }


def _fix_column_signs(v: np.ndarray) -> np.ndarray:
    if v.shape[1] == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def joint_kernel(mats, kernel_tol: float = 1e-10) -> KernelBasis:
    """Null space of sum_alpha M^alpha, equal to the intersection of the individual kernels."""
    mats = list(mats)
    if not mats:
        raise ValueError("at least one covariance matrix required")
    shape = mats[0].entries.shape
    if any(m.entries.shape != shape for m in mats):
        raise ValueError("covariance matrices differ in dimension")
    total = np.sum([m.entries for m in mats], axis=0)
    w, v = np.linalg.eigh(total)
    top = float(w[-1])
    threshold = kernel_tol * top if top > 0 else kernel_tol
    d = int(np.count_nonzero(w < threshold))
    if d == 0 or d == len(w):
        ratio = math.inf if d == len(w) else 0.0
    else:
        last_in = max(abs(float(w[d - 1])), np.finfo(float).tiny)
        ratio = float(w[d]) / last_in
    return KernelBasis(_fix_column_signs(v[:, :d]), w, threshold, ratio)


def sample_covariances(sample, basis: OperatorBasis) -> list[CovarianceMatrix]:
    return [covariance_matrix(s, basis, a) for a, s in enumerate(sample.states)]


# -- binary cache -------------------------------------------------------------

def cache_key(graph, n_up: int, n_states: int, degeneracy_tol: float, kernel_tol: float) -> str:
    doc = {
        "graph": graph.to_json(),
        "n_up": n_up,
        "n_states": n_states,
        "degeneracy_tol": degeneracy_tol,
        "kernel_tol": kernel_tol,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def save_kernel_cache(path, kernel: KernelBasis, sample) -> None:
    buf = io.BytesIO()
    np.savez(
        buf,
        columns=kernel.columns,
        spectrum=kernel.spectrum,
        threshold=kernel.threshold,
        gap_ratio=kernel.gap_ratio,
        vectors=sample.vectors,
        energies=sample.energies,
        extended=sample.degeneracy_extended,
    )
    Path(path).write_bytes(buf.getvalue())


def load_kernel_cache(path, sector: SectorBasis):
    from .eigen import EigenSample

    with np.load(io.BytesIO(Path(path).read_bytes())) as f:
        kernel = KernelBasis(f["columns"], f["spectrum"], float(f["threshold"]), float(f["gap_ratio"]))
        sample = EigenSample(sector, f["vectors"], f["energies"], bool(f["extended"]))
    return kernel, sample
