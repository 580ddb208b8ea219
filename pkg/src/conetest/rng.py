"""Splittable random streams.

Every stochastic component draws from a child stream keyed by a path of
integers under one master seed, so results are bit-identical regardless of
execution order or worker count. Philox is counter-based, which makes the
keyed construction cheap and collision-free.
"""

from __future__ import annotations

import numpy as np


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path)."""
    key = np.random.SeedSequence((int(seed),) + tuple(int(x) for x in path))
    return np.random.Generator(np.random.Philox(key))
