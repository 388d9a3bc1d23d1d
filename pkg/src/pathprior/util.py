"""Seed derivation helpers.

All randomness in the package flows through explicitly seeded streams.  A
master seed is fanned out into independent child seeds keyed by integer
paths, so any repetition of an experiment can be replayed from the seed
recorded next to its results.
"""

from __future__ import annotations

import random

import numpy as np


def derive_seed(master: int, *path: int) -> int:
    """Stable 64-bit child seed for the given (master, path) key."""
    ss = np.random.SeedSequence((int(master),) + tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def py_rng(seed: int) -> random.Random:
    """Python stdlib stream; used where exact big-integer draws are needed."""
    return random.Random(int(seed))


def np_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))
