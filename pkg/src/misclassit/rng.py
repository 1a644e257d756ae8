"""Deterministic counter-based random streams.

Every stochastic routine derives its own stream from (seed, path...) where
the path encodes replicate index and role tags.  Streams are Philox
generators keyed through a SeedSequence on the full path, so results do
not depend on execution order or worker count.
"""

from __future__ import annotations

import numpy as np

# Role tags appended to the stream path.
TAG_VALIDATION = 0
TAG_NONVALIDATION = 1
TAG_DATA = 2
TAG_BOOT = 3


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(x) for x in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
