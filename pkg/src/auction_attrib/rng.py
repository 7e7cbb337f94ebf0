"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a numpy
SeedSequence built from the master seed and a tuple of integer labels, so a
sub-stream depends only on ``(seed, labels)`` and never on execution order.
"""

from __future__ import annotations

import zlib

import numpy as np

ALGORITHM = "philox4x64-10 keyed by numpy.random.SeedSequence(entropy=seed, spawn_key=labels)"


def label(token: str) -> int:
    """Stable integer for a string label (crc32)."""
    return zlib.crc32(token.encode("utf-8"))


def make_rng(seed=None, *labels: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(x) for x in labels))
    return np.random.Generator(np.random.Philox(ss))
