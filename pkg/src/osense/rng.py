"""Seed plumbing.

Every random stream is a ``numpy.random.SeedSequence`` keyed by the
master seed plus a tuple of integers (sweep point, instance, stream), so
any instance can be regenerated alone, in any order, by any worker.
"""

from __future__ import annotations

import numpy as np

# Named sub-streams of one instance.
GRAPH, COUPLINGS, STAGE1, PROBES, SOLVER = range(5)


def derive_seed(master_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))


def substream(seed, key: int) -> np.random.SeedSequence:
    """Child of ``seed`` (int or SeedSequence) along one extra spawn-key level."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + (int(key),))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required; there is no global RNG")
    return np.random.default_rng(seed)
