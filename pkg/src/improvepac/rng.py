"""Counter-based random streams keyed by (seed, stream ids...).

Every trial gets its own Philox stream so trial outcomes do not depend on
execution order or on how many trials run in parallel.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream ids must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode())


def stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; keys may be ints or strings."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    ss = np.random.SeedSequence(entropy, spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
