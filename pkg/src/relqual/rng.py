"""Seed handling: every parallelizable unit gets a counter-derived stream."""

from __future__ import annotations

import numpy as np


def rng_from(seed) -> np.random.Generator:
    """Coerce an int / SeedSequence / Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """Derive an independent child seed at a counter path.

    The same (seed, path) always yields the same stream, regardless of how
    many workers exist or in which order units run.
    """
    return np.random.SeedSequence(seed, spawn_key=tuple(path))
