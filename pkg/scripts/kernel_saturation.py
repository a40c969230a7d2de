"""Kernel dimension against the number of sampled states.  Small sectors
need more than five states before D_K settles at N^2 + 3."""

import argparse

from osense.eigen import build_hamiltonian, lowest_eigenstates
from osense.graphs import has_swap_symmetry, sample_connected_er
from osense.kernel import build_operator_basis, joint_kernel, sample_covariances


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[6, 8, 10])
    p.add_argument("--states", type=int, nargs="+", default=list(range(3, 11)))
    p.add_argument("--graphs", type=int, default=3)
    args = p.parse_args()
    for n in args.sizes:
        basis = build_operator_basis(n)
        e = n + n // 2
        seed, done = 0, 0
        while done < args.graphs:
            g = sample_connected_er(n, e, seed)
            seed += 1
            if has_swap_symmetry(g):
                continue
            done += 1
            h = build_hamiltonian(g)
            dims = []
            for m in args.states:
                if m > h.dim:
                    break
                s = lowest_eigenstates(h, m)
                dims.append(f"{m}:{joint_kernel(sample_covariances(s, basis)).dim}")
            print(f"N={n} N_e={e} seed={seed - 1} (target {n * n + 3})  " + " ".join(dims))


if __name__ == "__main__":
    main()
