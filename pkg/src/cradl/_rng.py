"""Labelled random streams.

Every source of randomness in the simulator draws from its own stream keyed by
``(seed, tag, *extra)``, so adding or removing one consumer never shifts the
numbers seen by another.
"""

import numpy as np

FEATURES = 1
GROUND_TRUTH = 2
NOISE = 3
HETEROGENEITY = 4
ALLOCATION = 5
IDENTITY = 6
ATTACK = 7
SHUFFLE = 8
MONTE_CARLO = 9


def stream(seed, tag, *extra):
    """Return an independent ``Generator`` for the key ``(seed, tag, *extra)``."""
    key = [int(seed), int(tag)] + [int(e) for e in extra]
    if any(k < 0 for k in key):
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return np.random.default_rng(np.random.SeedSequence(key))
