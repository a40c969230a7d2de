"""End-to-end runs: graph, spectrum, kernel, sparse basis, selection, evaluation.

Instances are independent and fully determined by (master_seed, point,
index), so they can be farmed out to worker processes and collected by
index.  Wall-clock timings are kept out of the manifest (they go to a
separate timings file) so that repeated runs give identical manifests.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import rng as streams
from .config import RunConfig, config_from_dict
from .eigen import build_hamiltonian, lowest_eigenstates
from .extract import extract_generators, label_generators
from .graphs import (
    InteractionGraph,
    assign_couplings,
    find_swap_automorphisms,
    regular_lattice,
    sample_connected_er,
)
from .kernel import build_operator_basis, joint_kernel, sample_covariances, save_kernel_cache
from .selector import evaluate_success, read_geometry, select_hamiltonian, spectral_entropy
from .sparse import sparsify
from .symmetry import (
    build_geometric_set,
    build_intrinsic_set,
    hamiltonian_coeffs,
    predicted_kernel_ops,
    verify_zero_variance,
)

MANIFEST_VERSION = 1
CSV_HEADER = ("N_e", "mode", "n_instances", "n_success", "success_rate", "mean_DK")
MAX_ASYMMETRIC_TRIES = 1000
# execution-only settings: they cannot change any result, so they stay out
# of the manifest and go to the timings file instead
EXECUTION_KEYS = ("workers",)


@dataclass(frozen=True)
class InstanceSpec:
    point: int
    index: int
    n_vertices: int
    n_edges: int
    coupling_mode: str
    lattice: str | None = None

    @property
    def ident(self) -> str:
        return f"p{self.point}_i{self.index}"


def instance_graph(cfg: RunConfig, spec: InstanceSpec) -> InteractionGraph:
    if spec.lattice is not None:
        return regular_lattice(spec.lattice, spec.n_vertices)
    seed = streams.derive_seed(cfg.master_seed, spec.point, spec.index, streams.GRAPH)
    g = sample_connected_er(spec.n_vertices, spec.n_edges, seed)
    if cfg.require_asymmetric:
        attempt = 0
        while find_swap_automorphisms(g):
            attempt += 1
            if attempt > MAX_ASYMMETRIC_TRIES:
                raise RuntimeError("no asymmetric graph found")
            g = sample_connected_er(spec.n_vertices, spec.n_edges, streams.substream(seed, attempt))
    cseed = streams.derive_seed(cfg.master_seed, spec.point, spec.index, streams.COUPLINGS)
    return assign_couplings(g, spec.coupling_mode, cseed)


def _stream(cfg: RunConfig, spec: InstanceSpec, key: int):
    return streams.derive_seed(cfg.master_seed, spec.point, spec.index, key)


def run_instance(cfg: RunConfig, spec: InstanceSpec, out_dir=None, verify: bool = False) -> tuple[dict, dict]:
    """One pipeline pass.  Returns (manifest record, timings)."""
    record: dict = {
        "id": spec.ident,
        "seed": {"master_seed": cfg.master_seed, "point": spec.point, "index": spec.index},
        "n_vertices": spec.n_vertices,
        "n_edges": spec.n_edges,
        "coupling_mode": spec.coupling_mode,
        "lattice": spec.lattice,
    }
    timings: dict = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    try:
        g = instance_graph(cfg, spec)
        record["graph"] = g.to_json()
        if out_dir is not None:
            g.save(Path(out_dir) / f"graph_{spec.ident}.json")
        h = build_hamiltonian(g)
        n_states = min(cfg.n_states, h.dim)
        sample = lowest_eigenstates(
            h, n_states, cfg.degeneracy_tol, _stream(cfg, spec, streams.SOLVER), force_krylov=cfg.force_krylov
        )
        record["energies"] = sample.energies.tolist()
        record["n_states"] = sample.n_states
        record["degeneracy_extended"] = sample.degeneracy_extended
        lap("eigensolver")

        basis = build_operator_basis(g.n_vertices)
        mats = sample_covariances(sample, basis)
        kernel = joint_kernel(mats, cfg.kernel_tol)
        record["D_K"] = kernel.dim
        record["gap"] = kernel.gap_report()
        if out_dir is not None and cfg.save_kernel:
            save_kernel_cache(Path(out_dir) / f"kernel_{spec.ident}.bin", kernel, sample)
        lap("kernel")

        if verify:
            record["verification"] = verify_instance(g, sample, mats, basis, kernel, cfg.variance_tol)
            lap("verify")

        sb = sparsify(kernel, cfg.sparse, _stream(cfg, spec, streams.STAGE1))
        record["sparse"] = {
            "l1_total": float(sb.l1_norms.sum()),
            "stage1_iterations": sb.report["stage1"]["iterations"],
            "stage2_iterations": sb.report["stage2"]["iterations"],
            "polished_columns": sb.report["stage2"]["polished_columns"],
            "duplicates": len(sb.report["duplicates"]),
            "refilled": list(sb.report["refilled"]),
        }
        lap("sparsify")

        sel = select_hamiltonian(sb, sample, basis, cfg.cluster_tol, cfg.kernel_tol)
        c = sb.columns[:, sel.index]
        geometry = read_geometry(c, basis, cfg.geo_eps, sel.index)
        truth = spectral_entropy(hamiltonian_coeffs(g, basis), sample, basis, cfg.cluster_tol, cfg.kernel_tol)
        f_pairs = find_swap_automorphisms(g, respect_couplings=True)
        ok, reason = evaluate_success(geometry, sel.report.entropy, g, f_pairs, truth.entropy)
        record["selection"] = {
            "column": sel.index,
            "low_confidence": sel.low_confidence,
            "l1": float(sb.l1_norms[sel.index]),
            "support_size": int(len(sb.supports[sel.index])),
            "entropy": sel.report.to_json(),
            "terms": [[name, v] for name, v in basis.describe(c, cfg.sparse.rel_eps)],
        }
        record["truth_entropy"] = truth.entropy
        record["kernel_f_pairs"] = [list(p) for p in f_pairs]
        record["geometry"] = geometry.to_json()
        record["success"] = bool(ok)
        record["reason"] = reason
        lap("select")

        if cfg.extract.enabled:
            e = cfg.extract
            gs = extract_generators(
                sb, basis, sample.basis, e.r_probes, e.independence_tol, e.basis_cap,
                _stream(cfg, spec, streams.PROBES), e.zero_tol,
            )
            if g.n_vertices >= 3:
                ref = build_intrinsic_set(basis, g) + build_geometric_set(g, f_pairs, basis)
                gs = label_generators(gs, ref)
            record["generators"] = gs.to_json(basis)
            record["generator_count"] = len(gs)
            lap("extract")
    except Exception as exc:  # recorded, the run goes on
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["success"] = False
        record["reason"] = "error"
    return record, timings


def verify_instance(g, sample, mats, basis, kernel, tol: float) -> dict:
    """Zero-variance identities and oracle containment for one instance."""
    out: dict = {"violations": []}
    if g.n_vertices < 3:
        out["skipped"] = "intrinsic classes need at least 3 sites"
        return out
    ops = predicted_kernel_ops(g, sample, basis)
    report = verify_zero_variance(ops, sample, mats, basis, tol)
    out["zero_variance"] = {"ok": report.ok, "n_checked": len(report.entries)}
    out["violations"] += [
        {"operator": e["operator"], "class": e["class"], "max_variance": e["max_variance"]} for e in report.violations
    ]
    coeffs = np.stack([op.coeffs for op in ops], axis=1)
    residuals = [kernel.projector_residual(coeffs[:, j]) for j in range(coeffs.shape[1])]
    worst = int(np.argmax(residuals))
    out["max_projection_residual"] = float(residuals[worst])
    if residuals[worst] > 1e-6:
        out["violations"].append({"operator": ops[worst].name, "class": "containment", "residual": residuals[worst]})
    s = np.linalg.svd(coeffs, compute_uv=False)
    out["oracle_rank"] = int(np.count_nonzero(s > 1e-8 * s[0]))
    out["dimension_explained"] = out["oracle_rank"] == kernel.dim
    return out


# -- orchestration ------------------------------------------------------------

def plan(cfg: RunConfig) -> list[InstanceSpec]:
    specs = []
    if cfg.mode == "lattice":
        for p, kind in enumerate(cfg.lattices):
            specs.append(InstanceSpec(p, 0, cfg.n_vertices, 0, "AFM", kind))
        return specs
    for p, (n_edges, mode) in enumerate(cfg.sweep_points):
        for i in range(cfg.n_instances):
            specs.append(InstanceSpec(p, i, cfg.n_vertices, n_edges, mode))
    return specs


def _worker_init(blas_threads: int) -> None:
    threadpool_limits(blas_threads)


def _run_task(args):
    cfg_doc, spec, out_dir, verify = args
    return run_instance(config_from_dict(cfg_doc), spec, out_dir, verify)


def execute(cfg: RunConfig, specs, out_dir=None, verify: bool = False) -> list[tuple[dict, dict]]:
    """Run every spec; results come back in spec order whatever the worker count."""
    tasks = [(cfg.to_dict(), s, None if out_dir is None else str(out_dir), verify) for s in specs]
    if cfg.workers == 1 or len(tasks) <= 1:
        with threadpool_limits(cfg.blas_threads):
            return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(cfg.workers, initializer=_worker_init, initargs=(cfg.blas_threads,)) as pool:
        return list(pool.map(_run_task, tasks))


def aggregate(cfg: RunConfig, specs, records) -> list[dict]:
    rows = []
    if cfg.mode == "lattice":
        keys = [(s.lattice, s.point) for s in specs]
    else:
        keys = [(None, p) for p in range(len(cfg.sweep_points))]
    for label, p in dict.fromkeys(keys):
        recs = [r for s, r in zip(specs, records) if s.point == p]
        dks = [r["D_K"] for r in recs if "D_K" in r]
        n_ok = sum(bool(r.get("success")) for r in recs)
        if cfg.mode == "lattice":
            row = {"lattice": label, "n_vertices": cfg.n_vertices}
        else:
            n_edges, mode = cfg.sweep_points[p]
            row = {"N_e": n_edges, "mode": mode}
        row.update(
            n_instances=len(recs),
            n_success=n_ok,
            success_rate=n_ok / len(recs) if recs else 0.0,
            mean_DK=float(np.mean(dks)) if dks else math.nan,
        )
        rows.append(row)
    return rows


def build_manifest(cfg: RunConfig, specs, results) -> tuple[dict, dict]:
    records = [r for r, _ in results]
    echo = {k: v for k, v in cfg.to_dict().items() if k not in EXECUTION_KEYS}
    manifest = {
        "version": MANIFEST_VERSION,
        "config": echo,
        "records": records,
        "aggregate": aggregate(cfg, specs, records),
    }
    timings = {
        "execution": {k: getattr(cfg, k) for k in EXECUTION_KEYS},
        "instances": {r["id"]: t for r, t in results},
    }
    return manifest, timings


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r["N_e"], r["mode"], r["n_instances"], r["n_success"], repr(r["success_rate"]), repr(r["mean_DK"])])
    return buf.getvalue()


def run(cfg: RunConfig, out_dir=None, verify: bool | None = None) -> dict:
    """Execute ``cfg`` (single, sweep, lattice or verify) and write outputs to ``out_dir``."""
    if verify is None:
        verify = cfg.mode == "verify"
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    specs = plan(cfg)
    results = execute(cfg, specs, out_dir, verify)
    manifest, timings = build_manifest(cfg, specs, results)
    if out_dir is not None:
        out = Path(out_dir)
        (out / "manifest.json").write_text(dumps(manifest))
        (out / "timings.json").write_text(dumps(timings))
        if cfg.mode == "sweep":
            (out / "sweep.csv").write_text(sweep_csv(manifest["aggregate"]))
    return manifest


def verification_failures(manifest: dict) -> list[dict]:
    out = []
    for r in manifest["records"]:
        v = r.get("verification")
        if "error" in r:
            out.append({"id": r["id"], "seed": r["seed"], "error": r["error"]})
        elif v is not None:
            out += [{"id": r["id"], "seed": r["seed"], **x} for x in v["violations"]]
    return out
