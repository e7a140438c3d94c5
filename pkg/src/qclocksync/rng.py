"""Named, counter-derived random substreams.

Each stochastic component asks for its own stream by name, so adding a new
experiment (or a new draw in one component) never perturbs another stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence(int(seed), spawn_key=(key, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(seed_or_rng, name: str) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return substream(0 if seed_or_rng is None else seed_or_rng, name)
