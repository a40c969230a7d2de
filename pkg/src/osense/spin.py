"""Spin-1/2 computational basis at fixed magnetization.

Configurations are integer bitmasks with bit ``b`` holding site ``b``
(1 = up, 0 = down).  All operators handled here conserve total sigma^z,
so every state and operator lives inside a single fixed-``n_up`` sector.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MAX_SITES = 24


class OpKind(str, enum.Enum):
    Z = "Z"
    ZZ = "ZZ"
    HOP = "Hop"
    ZZZ = "ZZZ"
    HOPZ = "HopZ"


_N_SITES_OF_KIND = {OpKind.Z: 1, OpKind.ZZ: 2, OpKind.HOP: 2, OpKind.ZZZ: 3, OpKind.HOPZ: 3}


def hs_norm(kind: OpKind, n_sites: int) -> float:
    """Hilbert-Schmidt norm of the unnormalized operator on the full 2**n space.

    Pauli-z strings square to the identity; Hop = (XX + YY)/2 squares to
    a projector of rank 2**(n-1).
    """
    if kind in (OpKind.HOP, OpKind.HOPZ):
        return math.sqrt(2.0 ** (n_sites - 1))
    return math.sqrt(2.0**n_sites)


@dataclass(frozen=True)
class BasisOperator:
    """One dictionary element.

    ``sites`` is ``(i,)`` for Z, ``(i, j)`` with i<j for ZZ and Hop,
    ``(i, j, k)`` with i<j<k for ZZZ and ``(i, j, k)`` for HopZ where the
    hop acts on i<j and sigma^z on k.
    """

    kind: OpKind
    sites: tuple[int, ...]
    n_sites: int
    hs_norm: float = field(init=False)

    def __post_init__(self):
        kind = OpKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        s = self.sites
        if len(s) != _N_SITES_OF_KIND[kind]:
            raise ValueError(f"{kind.value} needs {_N_SITES_OF_KIND[kind]} sites, got {s}")
        if len(set(s)) != len(s):
            raise ValueError(f"repeated site in {s}")
        if any(x < 0 or x >= self.n_sites for x in s):
            raise ValueError(f"site index out of range in {s} for n_sites={self.n_sites}")
        if kind is OpKind.HOPZ:
            if not s[0] < s[1]:
                raise ValueError("HopZ hop pair must satisfy i<j")
        elif list(s) != sorted(s):
            raise ValueError(f"{kind.value} sites must be increasing, got {s}")
        object.__setattr__(self, "hs_norm", hs_norm(kind, self.n_sites))

    @property
    def label(self) -> str:
        if self.kind is OpKind.HOPZ:
            i, j, k = self.sites
            return f"HopZ({i},{j};{k})"
        return f"{self.kind.value}({','.join(map(str, self.sites))})"

    def __str__(self):
        return self.label


@dataclass(frozen=True, eq=False)
class SectorBasis:
    n_sites: int
    n_up: int
    states: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, config: int) -> int:
        pos = int(np.searchsorted(self.states, config))
        if pos >= self.dim or self.states[pos] != config:
            raise KeyError(f"configuration {config:b} not in sector")
        return pos

    def indices(self, configs: np.ndarray) -> np.ndarray:
        """Vectorized index_of; every entry must belong to the sector."""
        return np.searchsorted(self.states, configs)

    @cached_property
    def spins(self) -> np.ndarray:
        """sigma^z eigenvalues, shape (n_sites, dim), entries +-1."""
        bits = (self.states[None, :] >> np.arange(self.n_sites)[:, None]) & 1
        return (2 * bits - 1).astype(np.float64)

    @cached_property
    def _hop_cache(self) -> dict:
        return {}

    def hop_pairs(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) index arrays for the antiparallel swap on sites i, j."""
        key = (min(i, j), max(i, j))
        cache = self._hop_cache
        if key not in cache:
            bi = (self.states >> i) & 1
            bj = (self.states >> j) & 1
            src = np.flatnonzero(bi != bj)
            flipped = self.states[src] ^ ((1 << i) | (1 << j))
            cache[key] = (src, self.indices(flipped))
        return cache[key]

    def __repr__(self):
        return f"SectorBasis(n_sites={self.n_sites}, n_up={self.n_up}, dim={self.dim})"


def enumerate_sector(n_sites: int, n_up: int) -> SectorBasis:
    if not (0 <= n_up <= n_sites <= MAX_SITES):
        raise ValueError(f"need 0 <= n_up <= n_sites <= {MAX_SITES}, got n_sites={n_sites}, n_up={n_up}")
    configs = [sum(1 << b for b in combo) for combo in itertools.combinations(range(n_sites), n_up)]
    states = np.array(sorted(configs), dtype=np.int64)
    states.setflags(write=False)
    return SectorBasis(n_sites, n_up, states)


@dataclass(frozen=True, eq=False)
class SectorState:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.float64)
        if amp.shape != (self.basis.dim,):
            raise ValueError(f"amplitude length {amp.shape} does not match sector dimension {self.basis.dim}")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "SectorState":
        return SectorState(self.basis, self.amplitudes / self.norm)

    def dot(self, other: "SectorState") -> float:
        return float(self.amplitudes @ other.amplitudes)


def product_state(basis: SectorBasis, config: int) -> SectorState:
    amp = np.zeros(basis.dim)
    amp[basis.index_of(config)] = 1.0
    return SectorState(basis, amp)


def _check_sites(op: BasisOperator, basis: SectorBasis):
    if op.n_sites != basis.n_sites or max(op.sites) >= basis.n_sites:
        raise ValueError(f"{op.label} defined on {op.n_sites} sites, sector has {basis.n_sites}")


def apply_basis_array(op: BasisOperator, basis: SectorBasis, vecs: np.ndarray) -> np.ndarray:
    """Unnormalized W @ vecs for vecs of shape (dim,) or (dim, r)."""
    _check_sites(op, basis)
    z = basis.spins
    vecs = np.asarray(vecs, dtype=np.float64)
    expand = (slice(None),) + (None,) * (vecs.ndim - 1)
    s = op.sites
    if op.kind is OpKind.Z:
        return z[s[0]][expand] * vecs
    if op.kind is OpKind.ZZ:
        return (z[s[0]] * z[s[1]])[expand] * vecs
    if op.kind is OpKind.ZZZ:
        return (z[s[0]] * z[s[1]] * z[s[2]])[expand] * vecs
    src, dst = basis.hop_pairs(s[0], s[1])
    out = np.zeros_like(vecs)
    out[dst] = vecs[src]
    if op.kind is OpKind.HOPZ:
        out *= z[s[2]][expand]
    return out


def apply_basis_operator(op: BasisOperator, s: SectorState) -> SectorState:
    return SectorState(s.basis, apply_basis_array(op, s.basis, s.amplitudes))


def coeff_operator_matrix(c: np.ndarray, opbasis, sector: SectorBasis) -> sp.csr_matrix:
    """Sparse sector matrix of sum_i c_i W_i / hs_norm_i."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (opbasis.size,):
        raise ValueError(f"coefficient length {c.shape} does not match dictionary size {opbasis.size}")
    if opbasis.n_sites != sector.n_sites:
        raise ValueError("dictionary and sector disagree on n_sites")
    w = c / opbasis.norms
    z = sector.spins
    diag = np.zeros(sector.dim)
    hop_weights: dict[tuple[int, int], np.ndarray] = {}
    for idx in np.flatnonzero(w):
        op = opbasis.ops[idx]
        s = op.sites
        if op.kind is OpKind.Z:
            diag += w[idx] * z[s[0]]
        elif op.kind is OpKind.ZZ:
            diag += w[idx] * z[s[0]] * z[s[1]]
        elif op.kind is OpKind.ZZZ:
            diag += w[idx] * z[s[0]] * z[s[1]] * z[s[2]]
        else:
            key = (s[0], s[1])
            acc = hop_weights.setdefault(key, np.zeros(sector.dim))
            acc += w[idx] if op.kind is OpKind.HOP else w[idx] * z[s[2]]
    rows = [np.arange(sector.dim)]
    cols = [np.arange(sector.dim)]
    vals = [diag]
    for (i, j), weight in sorted(hop_weights.items()):
        src, dst = sector.hop_pairs(i, j)
        rows.append(dst)
        cols.append(src)
        vals.append(weight[src])
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sector.dim, sector.dim),
    )
    m.sum_duplicates()
    return m


def apply_coeff_operator(c: np.ndarray, opbasis, s: SectorState) -> SectorState:
    return SectorState(s.basis, coeff_operator_matrix(c, opbasis, s.basis) @ s.amplitudes)
