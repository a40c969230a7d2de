"""Interaction graphs: connected Erdos-Renyi sampling, regular lattices, swap symmetries."""

from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import make_rng


class CouplingMode(str, enum.Enum):
    AFM = "AFM"
    RANDOM_SIGN = "RandomSign"


class LatticeKind(str, enum.Enum):
    CHAIN = "Chain"
    RING = "Ring"
    SQUARE_LADDER = "SquareLadder"
    TRIANGULAR_LADDER = "TriangularLadder"
    SQUARE_2D = "Square2D"
    HONEYCOMB = "Honeycomb"


@dataclass(frozen=True)
class InteractionGraph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    couplings: tuple[float, ...]

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        couplings = tuple(float(j) for j in self.couplings)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "couplings", couplings)
        if len(couplings) != len(edges):
            raise ValueError("one coupling per edge required")
        for a, b in edges:
            if not 0 <= a < b < self.n_vertices:
                raise ValueError(f"bad edge ({a}, {b}) for {self.n_vertices} vertices")
        if list(edges) != sorted(set(edges)):
            raise ValueError("edges must be sorted and unique")
        if not is_connected(self.n_vertices, edges):
            raise ValueError("interaction graph must be connected")

    @classmethod
    def from_edges(cls, n_vertices, edges, couplings=None) -> "InteractionGraph":
        """Canonicalize an arbitrary edge list (orientation, order); J defaults to 1."""
        if couplings is None:
            couplings = [1.0] * len(edges)
        pairs = {}
        for (a, b), j in zip(edges, couplings):
            a, b = sorted((int(a), int(b)))
            if (a, b) in pairs:
                raise ValueError(f"duplicate edge ({a}, {b})")
            pairs[(a, b)] = float(j)
        keys = sorted(pairs)
        return cls(n_vertices, tuple(keys), tuple(pairs[k] for k in keys))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def coupling(self, i: int, j: int) -> float:
        """J_ij, or 0.0 when (i, j) is not an edge."""
        a, b = sorted((i, j))
        try:
            return self.couplings[self.edges.index((a, b))]
        except ValueError:
            return 0.0

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_vertices, self.n_vertices))
        for (a, b), j in zip(self.edges, self.couplings):
            adj[a, b] = adj[b, a] = j
        return adj

    def to_json(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "edges": [list(e) for e in self.edges],
            "couplings": list(self.couplings),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "InteractionGraph":
        return cls.from_edges(doc["n_vertices"], doc["edges"], doc.get("couplings"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "InteractionGraph":
        return cls.from_json(json.loads(Path(path).read_text()))


def is_connected(n_vertices: int, edges) -> bool:
    if n_vertices <= 1:
        return True
    nbrs = [[] for _ in range(n_vertices)]
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == n_vertices


def all_pairs(n_vertices: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n_vertices) for j in range(i + 1, n_vertices)]


def sample_connected_er(n_vertices: int, n_edges: int, seed, max_tries: int = 100_000) -> InteractionGraph:
    """Uniform connected graph with exactly ``n_edges`` edges, by whole-graph rejection."""
    n_pairs = math.comb(n_vertices, 2)
    if n_vertices < 1 or not (n_vertices - 1 <= n_edges <= n_pairs):
        raise ValueError(
            f"need {n_vertices - 1} <= n_edges <= {n_pairs} for a connected graph on {n_vertices} vertices, got {n_edges}"
        )
    rng = make_rng(seed)
    pairs = all_pairs(n_vertices)
    for _ in range(max_tries):
        chosen = np.sort(rng.choice(n_pairs, size=n_edges, replace=False))
        edges = [pairs[k] for k in chosen]
        if is_connected(n_vertices, edges):
            return InteractionGraph(n_vertices, tuple(edges), (1.0,) * n_edges)
    raise RuntimeError(f"no connected graph after {max_tries} draws")


def assign_couplings(g: InteractionGraph, mode, seed=None) -> InteractionGraph:
    mode = CouplingMode(mode)
    if mode is CouplingMode.AFM:
        couplings = (1.0,) * g.n_edges
    else:
        rng = make_rng(seed)
        couplings = tuple(float(x) for x in rng.choice([1.0, -1.0], size=g.n_edges))
    return InteractionGraph(g.n_vertices, g.edges, couplings)


def _grid_shape(n: int) -> tuple[int, int]:
    """Most square factorization n = lx * ly with lx >= ly >= 2."""
    for ly in range(math.isqrt(n), 1, -1):
        if n % ly == 0:
            return n // ly, ly
    raise ValueError(f"{n} vertices admit no rectangular lx*ly grid with both sides >= 2")


def regular_lattice(kind, n_vertices: int) -> InteractionGraph:
    """Nearest-neighbour lattice with open boundaries (except Ring), all J = 1.

    Ladders index site (x, leg) as 2*x + leg.  Square2D and Honeycomb index
    site (x, y) as y*lx + x on the most square lx*ly grid; the honeycomb is
    the brick-wall embedding, keeping the vertical bond above (x, y) only
    when x + y is even.
    """
    kind = LatticeKind(kind)
    n = n_vertices
    edges: list[tuple[int, int]] = []
    if kind in (LatticeKind.CHAIN, LatticeKind.RING):
        if n < 2 or (kind is LatticeKind.RING and n < 3):
            raise ValueError(f"{kind.value} needs more vertices, got {n}")
        edges = [(i, i + 1) for i in range(n - 1)]
        if kind is LatticeKind.RING:
            edges.append((0, n - 1))
    elif kind in (LatticeKind.SQUARE_LADDER, LatticeKind.TRIANGULAR_LADDER):
        if n < 4 or n % 2:
            raise ValueError(f"{kind.value} needs an even vertex count >= 4, got {n}")
        rungs = n // 2
        for x in range(rungs):
            edges.append((2 * x, 2 * x + 1))
            if x + 1 < rungs:
                edges += [(2 * x, 2 * x + 2), (2 * x + 1, 2 * x + 3)]
                if kind is LatticeKind.TRIANGULAR_LADDER:
                    edges.append((2 * x + 1, 2 * x + 2))
    elif kind is LatticeKind.SQUARE_2D:
        lx, ly = _grid_shape(n)
        for y in range(ly):
            for x in range(lx):
                v = y * lx + x
                if x + 1 < lx:
                    edges.append((v, v + 1))
                if y + 1 < ly:
                    edges.append((v, v + lx))
    else:
        if n % 2:
            raise ValueError(f"honeycomb needs an even vertex count (two-site unit cell), got {n}")
        lx, ly = _grid_shape(n)
        for y in range(ly):
            for x in range(lx):
                v = y * lx + x
                if x + 1 < lx:
                    edges.append((v, v + 1))
                if y + 1 < ly and (x + y) % 2 == 0:
                    edges.append((v, v + lx))
    return InteractionGraph.from_edges(n, edges)


def find_swap_automorphisms(g: InteractionGraph, respect_couplings: bool = False) -> list[tuple[int, int]]:
    """Pairs (m, n) whose transposition maps the edge set onto itself.

    With ``respect_couplings`` the transposition must also preserve every
    J, which is what makes sigma_m . sigma_n commute with H.
    """
    adj = g.adjacency()
    if not respect_couplings:
        adj = (adj != 0).astype(float)
    out = []
    for m in range(g.n_vertices):
        for n in range(m + 1, g.n_vertices):
            rm = np.delete(adj[m], [m, n])
            rn = np.delete(adj[n], [m, n])
            if np.array_equal(rm, rn):
                out.append((m, n))
    return out


def has_swap_symmetry(g: InteractionGraph) -> bool:
    return bool(find_swap_automorphisms(g))
