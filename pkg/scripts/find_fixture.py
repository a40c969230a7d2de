"""Scan seeded ER graphs for a swap-symmetric bond whose lowest states split
between its singlet and triplet sectors in a given pattern."""

import argparse

from osense.eigen import EigenSample, build_hamiltonian, lowest_eigenstates
from osense.graphs import find_swap_automorphisms, sample_connected_er
from osense.kernel import build_operator_basis
from osense.symmetry import bond_sector


def split(sample, m, n, basis):
    out = []
    for a in range(sample.n_states):
        one = EigenSample(sample.basis, sample.vectors[:, [a]], sample.energies[[a]])
        out.append(bond_sector(one, m, n, basis))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--edges", type=int, default=11)
    p.add_argument("--singlets", type=int, default=3)
    p.add_argument("--triplets", type=int, default=2)
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--max-degree", type=int, default=None, help="skip graphs above this degree")
    args = p.parse_args()
    basis = build_operator_basis(args.n)
    n_states = args.singlets + args.triplets
    for seed in range(args.seeds):
        g = sample_connected_er(args.n, args.edges, seed)
        pairs = find_swap_automorphisms(g, respect_couplings=True)
        if not pairs:
            continue
        if args.max_degree is not None and max(g.adjacency().astype(bool).sum(axis=1)) > args.max_degree:
            continue
        s = lowest_eigenstates(build_hamiltonian(g), n_states)
        if s.n_states != n_states:
            continue
        for m, n in pairs:
            sec = split(s, m, n, basis)
            if sec.count("singlet") == args.singlets and sec.count("triplet") == args.triplets:
                print(f"seed {seed}: pair ({m}, {n}) edges {list(g.edges)}")


if __name__ == "__main__":
    main()
