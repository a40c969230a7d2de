"""Planted-dictionary recovery rate of the two-stage sparsifier."""

import argparse
import time

from osense.sparse import SparseConfig, match_planted, planted_dictionary, sparsify


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", nargs="+", default=["100x10", "400x10", "400x30"])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--max-support", type=int, default=5)
    p.add_argument("--cos", type=float, default=0.99)
    args = p.parse_args()
    cfg = SparseConfig()
    for size in args.sizes:
        n_w, d = map(int, size.split("x"))
        hits, t0 = 0, time.perf_counter()
        for trial in range(args.trials):
            s, k0 = planted_dictionary(n_w, d, min(args.max_support, n_w // d), trial)
            hits += match_planted(sparsify(k0, cfg, seed=trial).columns, s).min() >= args.cos
        print(f"N_W={n_w} D_K={d}: {hits}/{args.trials} recovered ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
