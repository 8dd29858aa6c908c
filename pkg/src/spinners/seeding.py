"""Deterministic seed derivation.

Every random draw in the package comes from a ``numpy.random.Generator``
created here, so that a (seed, key path) pair always reproduces the same
stream and distinct key paths give statistically independent streams.
"""
from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for ``seed`` refined by an optional path of integer keys."""
    return np.random.default_rng(_sequence(seed, keys))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit child seed; ``derive_seed(s)`` with no keys returns ``s``."""
    if not keys:
        return int(seed) & SEED_MASK
    return int(_sequence(seed, keys).generate_state(1, np.uint64)[0])


def _sequence(seed: int, keys: tuple[int, ...]) -> np.random.SeedSequence:
    if int(seed) < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    # spawn_key keeps child streams disjoint from every plain integer seed
    return np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in keys))
