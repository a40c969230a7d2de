"""Two-stage sparsification of a kernel basis.

Stage I rotates K0 by an orthogonal A maximizing ||K0 A||_3^3 (polar
fixed-point iteration).  Stage II drops mutual orthogonality and, column
by column, minimizes ||V q||_1 over the unit sphere of mixing weights q
with Adam-scaled Riemannian subgradient steps.  A support-polishing step
then snaps each column onto the exact span(K0) vector with that support
whenever that lowers the l1 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import make_rng

TRACE_POINTS = 1000


@dataclass(frozen=True)
class Stage1Config:
    max_iters: int = 5000
    conv_tol: float = 1e-10
    restarts: int = 1


@dataclass(frozen=True)
class Stage2Config:
    step: float = 1e-2
    decay: float = 0.5
    decay_every: int = 2000
    max_iters: int = 20000
    window: int = 200
    rel_tol: float = 1e-9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    polish: bool = True
    polish_levels: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 3e-2, 1e-1)
    null_tol: float = 1e-5


@dataclass(frozen=True)
class SparseConfig:
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    rel_eps: float = 1e-4
    cos_tol: float = 0.999
    rank_tol: float = 1e-6
    refine_refill: bool = True
    refill_rounds: int = 3


@dataclass(frozen=True, eq=False)
class SparseBasis:
    columns: np.ndarray  # (N_W, D), unit l2 columns
    supports: tuple[np.ndarray, ...]
    l1_norms: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def from_columns(cls, columns: np.ndarray, report: dict | None = None) -> "SparseBasis":
        cols = columns / np.linalg.norm(columns, axis=0)
        supports = tuple(np.flatnonzero(cols[:, j]) for j in range(cols.shape[1]))
        return cls(cols, supports, np.abs(cols).sum(axis=0), dict(report or {}))


def downsample(trace, n: int = TRACE_POINTS) -> list[float]:
    trace = list(trace)
    if len(trace) <= n:
        return [float(x) for x in trace]
    idx = np.unique(np.linspace(0, len(trace) - 1, n).round().astype(int))
    return [float(trace[i]) for i in idx]


def _columns(k0) -> np.ndarray:
    return np.asarray(getattr(k0, "columns", k0), dtype=np.float64)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def l3_objective(k: np.ndarray) -> float:
    return float(np.sum(np.abs(k) ** 3))


def stage1_l3_rotate(k0, max_iters: int = 5000, conv_tol: float = 1e-10, seed=0) -> tuple[np.ndarray, dict]:
    """Orthogonal A maximizing ||K0 A||_3^3 via A <- polar(K0^T [(K0 A) * |K0 A|]).

    The objective is convex, so each polar step cannot decrease it; an
    iterate that rounds below its predecessor ends the loop and is
    discarded, which keeps the recorded trace exactly non-decreasing.
    """
    k0 = _columns(k0)
    d = k0.shape[1]
    rng = make_rng(seed)
    a = random_orthogonal(d, rng)
    k = k0 @ a
    f = l3_objective(k)
    trace = [f]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = k0.T @ (k * np.abs(k))
        u, _, vt = np.linalg.svd(g)
        a_new = u @ vt
        k_new = k0 @ a_new
        f_new = l3_objective(k_new)
        if f_new < f:
            converged = True
            break
        step = np.linalg.norm(a_new - a)
        a, k, f = a_new, k_new, f_new
        trace.append(f)
        if step < conv_tol:
            converged = True
            break
    report = {"iterations": it, "converged": converged, "objective": trace}
    return a, report


def _polish_column(v: np.ndarray, k: np.ndarray, levels, null_tol: float = 1e-5) -> np.ndarray | None:
    """Sparsest exact span(V) vector obtained by zeroing small entries of k, if any beats k in l1."""
    best, best_l1 = None, np.abs(k).sum()
    kmax = np.abs(k).max()
    tried = set()
    for level in levels:
        on = np.abs(k) >= level * kmax
        key = on.tobytes()
        if key in tried or on.all():
            continue
        tried.add(key)
        off = v[~on]
        try:
            _, s, vt = np.linalg.svd(off, full_matrices=off.shape[0] < off.shape[1])
        except np.linalg.LinAlgError:
            continue
        s_full = np.zeros(v.shape[1])
        s_full[: len(s)] = s
        # kernel columns carry numerical noise well above machine precision, so exact
        # sparse directions show up as small but nonzero singular values
        null = vt[s_full <= null_tol]
        if len(null) == 0:
            continue
        q = v.T @ k
        q_proj = null.T @ (null @ q)
        if np.linalg.norm(q_proj) < 0.5 * np.linalg.norm(q):
            continue
        cand = v @ q_proj
        cand /= np.linalg.norm(cand)
        if cand @ k < 0:
            cand = -cand
        l1 = np.abs(cand).sum()
        if l1 < best_l1 - 1e-12:
            best, best_l1 = cand, l1
    return best


def stage2_l1_refine(k0, warm: np.ndarray, config: Stage2Config = Stage2Config()) -> SparseBasis:
    """Independently minimize ||V q||_1 subject to ||q||_2 = 1 for each warm column.

    V is an orthonormal basis of span(warm); every column starts from its
    own warm vector.  Returns the best iterate per column, never worse in
    l1 than the warm start.
    """
    v = np.asarray(warm, dtype=np.float64)
    v, _ = np.linalg.qr(v)  # orthonormal basis of the warm span
    q = v.T @ warm
    q /= np.linalg.norm(q, axis=0)
    d = q.shape[1]
    m = np.zeros_like(q)
    s = np.zeros_like(q)
    best_q = q.copy()
    best_l1 = np.abs(v @ q).sum(axis=0)
    start_l1 = best_l1.copy()
    checkpoint = best_l1.copy()
    active = np.ones(d, dtype=bool)
    trace = [best_l1.sum()]
    it = 0
    for it in range(1, config.max_iters + 1):
        cols = np.flatnonzero(active)
        qa = q[:, cols]
        k = v @ qa
        l1 = np.abs(k).sum(axis=0)
        improved = l1 < best_l1[cols]
        best_l1[cols[improved]] = l1[improved]
        best_q[:, cols[improved]] = qa[:, improved]
        grad = v.T @ np.sign(k)
        grad -= qa * np.sum(grad * qa, axis=0)
        m[:, cols] = config.beta1 * m[:, cols] + (1 - config.beta1) * grad
        s[:, cols] = config.beta2 * s[:, cols] + (1 - config.beta2) * grad**2
        mhat = m[:, cols] / (1 - config.beta1**it)
        shat = s[:, cols] / (1 - config.beta2**it)
        lr = config.step * config.decay ** ((it - 1) // config.decay_every)
        qa = qa - lr * mhat / (np.sqrt(shat) + config.adam_eps)
        q[:, cols] = qa / np.linalg.norm(qa, axis=0)
        trace.append(best_l1.sum())
        if it % config.window == 0:
            stalled = (checkpoint - best_l1) <= config.rel_tol * checkpoint
            active &= ~stalled
            checkpoint = best_l1.copy()
            if not active.any():
                break
    k = v @ best_q
    k /= np.linalg.norm(k, axis=0)
    polished = 0
    if config.polish:
        for j in range(d):
            cand = _polish_column(v, k[:, j], config.polish_levels, config.null_tol)
            if cand is not None:
                k[:, j] = cand
                polished += 1
    l1 = np.abs(k).sum(axis=0)
    report = {
        "iterations": it,
        "all_converged": not active.any(),
        "polished_columns": polished,
        "l1_start": float(start_l1.sum()),
        "l1_final": float(l1.sum()),
        "objective": downsample(trace),
    }
    assert np.all(l1 <= start_l1 + 1e-9)
    return SparseBasis(k, tuple(np.flatnonzero(k[:, j]) for j in range(d)), l1, {"stage2": report})


def hard_threshold(k: SparseBasis, rel_eps: float = 1e-4) -> SparseBasis:
    cols = k.columns.copy()
    peak = np.abs(cols).max(axis=0)
    if np.any(peak == 0):
        bad = np.flatnonzero(peak == 0).tolist()
        raise ValueError(f"columns {bad} have empty support")
    cols[np.abs(cols) < rel_eps * peak] = 0.0
    cols /= np.linalg.norm(cols, axis=0)
    supports = tuple(np.flatnonzero(cols[:, j]) for j in range(cols.shape[1]))
    return SparseBasis(cols, supports, np.abs(cols).sum(axis=0), dict(k.report))


def detect_duplicates(k: SparseBasis, cos_tol: float = 0.999) -> list[tuple[int, int]]:
    cos = np.abs(k.columns.T @ k.columns)
    i, j = np.nonzero(np.triu(cos > cos_tol, 1))
    return [(int(a), int(b)) for a, b in zip(i, j)]


def _complement(kept: np.ndarray, k0: np.ndarray, rank_tol: float) -> np.ndarray:
    """Orthonormal basis of the part of span(K0) orthogonal to span(kept)."""
    coords = k0.T @ kept
    u, sv, _ = np.linalg.svd(coords, full_matrices=True)
    r = int(np.count_nonzero(sv > rank_tol * sv[0])) if len(sv) else 0
    return k0 @ u[:, r:]


def _rank(cols: np.ndarray, rank_tol: float) -> int:
    s = np.linalg.svd(cols, compute_uv=False)
    return int(np.count_nonzero(s > rank_tol * s[0]))


def restore_rank(
    k: SparseBasis,
    k0,
    cos_tol: float = 0.999,
    rank_tol: float = 1e-6,
    refine: Stage2Config | None = None,
    rel_eps: float = 1e-4,
    rounds: int = 3,
    seed=0,
) -> SparseBasis:
    """Replace collapsed columns by directions of span(K0) that K misses.

    Columns that duplicate an earlier one are the ones replaced.  The
    refill vectors come from the orthogonal complement of the kept
    columns inside span(K0); with ``refine`` set they are sparsified
    within that complement (Stage I + II) before insertion, repeating up
    to ``rounds`` times if the refill collapses again.
    """
    k0 = _columns(k0)
    cols = k.columns.copy()
    report = dict(k.report)
    report["duplicates"] = detect_duplicates(k, cos_tol)
    report["rank"] = _rank(cols, rank_tol)
    refilled: list[int] = []
    rng = make_rng(seed) if refine is not None else None
    for rnd in range(rounds + 1):
        current = SparseBasis.from_columns(cols)
        pairs = detect_duplicates(current, cos_tol)
        if _rank(cols, rank_tol) == k.dim and not pairs:
            break
        drop = sorted({b for _, b in pairs})
        if not drop:
            break  # rank loss without near-duplicates; nothing sensible to replace
        keep = [j for j in range(k.dim) if j not in drop]
        comp = _complement(cols[:, keep], k0, rank_tol)
        if comp.shape[1] == 0:
            break
        fill = comp
        if refine is not None and rnd < rounds:
            a, _ = stage1_l3_rotate(comp, seed=rng)
            fill = hard_threshold(stage2_l1_refine(comp, comp @ a, refine), rel_eps).columns
        n = min(len(drop), fill.shape[1])
        cols[:, drop[:n]] = fill[:, :n]
        refilled += drop[:n]
    if not refilled:
        report["refilled"] = []
        return replace(k, report=report)
    report["refilled"] = sorted(set(refilled))
    report["collapse_flagged"] = True
    report["rank_after"] = _rank(cols, rank_tol)
    return SparseBasis.from_columns(cols, report)


def sparsify(k0, config: SparseConfig = SparseConfig(), seed=0) -> SparseBasis:
    """Stage I (best of ``restarts``), Stage II, hard threshold, collapse repair."""
    k0c = _columns(k0)
    if k0c.shape[1] == 0:
        raise ValueError("empty kernel basis")
    rng = make_rng(seed)
    best = None
    for r in range(config.stage1.restarts):
        a, rep = stage1_l3_rotate(k0c, config.stage1.max_iters, config.stage1.conv_tol, rng)
        score = np.abs(k0c @ a).sum()
        if best is None or score < best[0]:
            best = (score, a, rep, r)
    _, a, rep1, chosen = best
    warm = k0c @ a
    refined = stage2_l1_refine(k0c, warm, config.stage2)
    out = hard_threshold(refined, config.rel_eps)
    refine = config.stage2 if config.refine_refill else None
    out = restore_rank(out, k0c, config.cos_tol, config.rank_tol, refine, config.rel_eps, config.refill_rounds, rng)
    report = dict(out.report)
    report["stage1"] = {**rep1, "objective": downsample(rep1["objective"]), "restart_chosen": chosen}
    return replace(out, report=report)


def planted_dictionary(n_w: int, d: int, max_support: int, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """(S, K0): S has orthonormal columns on disjoint random supports of size
    1..max_support, K0 = S Q for a random rotation Q."""
    if d * max_support > n_w:
        raise ValueError("supports do not fit disjointly")
    rng = make_rng(seed)
    rows = rng.permutation(n_w)
    s = np.zeros((n_w, d))
    start = 0
    for j in range(d):
        size = int(rng.integers(1, max_support + 1))
        idx = rows[start : start + size]
        start += size
        v = rng.standard_normal(size)
        s[idx, j] = v / np.linalg.norm(v)
    return s, s @ random_orthogonal(d, rng)


def match_planted(found: np.ndarray, planted: np.ndarray) -> np.ndarray:
    """Best |cosine| of each planted column against the found columns."""
    f = found / np.linalg.norm(found, axis=0)
    return np.abs(planted.T @ f).max(axis=1)
