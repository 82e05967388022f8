"""Seeded random streams.

Every randomized routine takes an explicit ``numpy.random.Generator``. Work that
fans out (replicates, grid points, blocks of Monte Carlo paths) derives child
streams from a ``SeedSequence`` so results do not depend on execution order.
"""

from __future__ import annotations

import secrets

import numpy as np


def fresh_seed() -> int:
    """Draw a 64-bit master seed from OS entropy."""
    return secrets.randbits(64)


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # Derive a child sequence from the generator's own state.
        return np.random.SeedSequence(seed.integers(0, 2**63, size=4).tolist())
    return np.random.SeedSequence(seed)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(as_seed_sequence(rng))


def spawn_generators(seed, count: int) -> list[np.random.Generator]:
    """Independent generators, one per task, fixed by ``seed`` alone."""
    return [np.random.default_rng(s) for s in as_seed_sequence(seed).spawn(count)]
