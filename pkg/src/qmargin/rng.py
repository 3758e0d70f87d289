"""Seeded random streams keyed by (master seed, index path).

Every randomized routine in the library takes either an explicit
``numpy.random.Generator`` or a seed from which one is derived here.
Streams for sub-tasks are derived with :func:`rng_from` using an integer key
path, so results are reproducible per (seed, indices) and independent of
execution order or thread count.
"""
from __future__ import annotations

import numpy as np


def rng_from(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``seed`` and ``key``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def derive_seed(seed: int, *key: int) -> int:
    """A child seed for the stream identified by ``seed`` and ``key``."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).generate_state(1)[0])


def as_rng(seed_or_rng: int | np.random.Generator | None) -> np.random.Generator:
    """Coerce an int seed, ``None``, or an existing generator to a generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
