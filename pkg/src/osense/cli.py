"""Command line entry point: ``osense <subcommand> --config FILE --set key=value --out DIR``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, config_from_dict, load_config
from .pipeline import dumps, run, verification_failures
from .selector import duality_crossover

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osense", description="Learn Heisenberg geometries from eigenstates.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "single": "run the pipeline on n_instances graphs at one (N_v, N_e) point",
        "sweep": "success rate over sweep_edges x coupling_modes, writes sweep.csv",
        "verify": "zero-variance identities and kernel-content checks (exit 2 on violation)",
        "lattice": "pipeline on regular lattices",
        "crossover": "complexity of H vs its complement-graph dual, and the crossing point",
        "extract": "generator extraction on a saved run",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", type=Path, help="YAML config file")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        s.add_argument("--out", type=Path, help="output directory")
        if name == "extract":
            s.add_argument("--run", type=Path, required=True, help="directory holding a manifest.json")
            s.add_argument("--instance", action="append", default=[], help="record id(s) to process; default all")
    return p


def _summary(manifest: dict) -> str:
    lines = []
    for row in manifest["aggregate"]:
        head = f"{row['lattice']} N_v={row['n_vertices']}" if "lattice" in row else f"N_e={row['N_e']} {row['mode']}"
        lines.append(
            f"{head}: {row['n_success']}/{row['n_instances']} succeeded, mean D_K={row['mean_DK']:.1f}"
        )
    errors = [r for r in manifest["records"] if "error" in r]
    if errors:
        lines.append(f"{len(errors)} instance(s) raised errors; see manifest")
    return "\n".join(lines)


def _crossover(cfg, out: Path | None) -> int:
    c = duality_crossover(cfg.n_vertices)
    ne = np.arange(1, c.n_pairs + 1)
    rows = list(zip(ne.tolist(), c.xi_h(ne).tolist(), c.xi_dual(ne).tolist()))
    print(f"N_v={c.n_vertices} P={c.n_pairs} critical N_e={c.critical_ne:.4f} ({c.ratio:.4f} P)")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        lines = ["N_e,xi_H,xi_dual"] + [f"{a},{b!r},{d!r}" for a, b, d in rows]
        (out / "crossover.csv").write_text("\n".join(lines) + "\n")
        doc = {"n_vertices": c.n_vertices, "n_pairs": c.n_pairs, "critical_ne": c.critical_ne, "ratio": c.ratio}
        (out / "crossover.json").write_text(dumps(doc))
    return EXIT_OK


def _extract(args) -> int:
    src = args.run / "manifest.json"
    try:
        saved = json.loads(src.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {src}: {exc}") from exc
    doc = saved["config"]
    doc["extract"] = {**doc.get("extract", {}), "enabled": True}
    cfg = load_config(args.config, args.overrides, base=doc) if (args.config or args.overrides) else config_from_dict(doc)
    # replaying the saved config reproduces every instance exactly; the
    # summary then keeps only the requested records
    manifest = run(cfg, None)
    wanted = set(args.instance)
    records = [r for r in manifest["records"] if not wanted or r["id"] in wanted]
    if wanted and not records:
        raise ConfigError(f"no records with ids {sorted(wanted)}")
    out = {"source": str(src), "records": [{k: r.get(k) for k in ("id", "seed", "generator_count", "generators", "error")} for r in records]}
    for r in records:
        print(f"{r['id']}: {r.get('generator_count', 'error')} generators")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "generators.json").write_text(dumps(out))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "extract":
            return _extract(args)
        cfg = load_config(args.config, [f"mode={args.command}", *args.overrides])
        if args.command == "crossover":
            return _crossover(cfg, args.out)
        manifest = run(cfg, args.out)
        print(_summary(manifest))
        if args.command == "verify":
            bad = verification_failures(manifest)
            for v in bad:
                print("violation:", json.dumps(v, sort_keys=True), file=sys.stderr)
            return EXIT_VERIFY if bad else EXIT_OK
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
