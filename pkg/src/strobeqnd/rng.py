"""Reproducible per-trajectory random streams.

Every trajectory owns independent Philox (counter-based) streams keyed by
``(seed, trajectory index, purpose)``.  A trajectory's draws therefore do not
depend on how trajectories are batched or distributed over threads.
"""

import numpy as np

DYNAMICS = 0
SHOT_NOISE = 1
PROTOCOL = 2


def stream(seed: int, index: int, purpose: int = DYNAMICS) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(index), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))
