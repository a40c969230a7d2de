"""Print a sweep.csv as a text table, one column per coupling mode."""

import csv
import sys
from collections import defaultdict


def main(path):
    rates = defaultdict(dict)
    with open(path) as f:
        for row in csv.DictReader(f):
            rates[int(row["N_e"])][row["mode"]] = float(row["success_rate"])
    modes = sorted({m for r in rates.values() for m in r})
    print("N_e  " + "  ".join(f"{m:>10}" for m in modes))
    for ne in sorted(rates):
        print(f"{ne:<4} " + "  ".join(f"{rates[ne].get(m, float('nan')):>10.2f}" for m in modes))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "sweep.csv")
