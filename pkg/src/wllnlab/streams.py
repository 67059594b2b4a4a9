"""Reproducible counter-based random streams.

One master seed; every path gets its own stream through
``SeedSequence(entropy=master, spawn_key=(replication,))`` feeding a Philox
counter-based generator.  Distinct (master, replication) pairs can never
collide, and the construction is platform independent, so every sampled
figure regenerates bit-for-bit from the manifest.
"""

from __future__ import annotations

import numpy as np


def path_rng(master_seed: int, replication: int = 0) -> np.random.Generator:
    if not 0 <= int(master_seed) < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if replication < 0:
        raise ValueError("replication must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replication),))
    return np.random.Generator(np.random.Philox(ss))
