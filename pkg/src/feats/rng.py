"""Seeded, counter-based random streams.

All randomness flows through Philox-4x64 (a counter-based generator whose
output depends only on key and counter, not on the platform).  A stream is
keyed by ``(seed, stream_id)`` so independent consumers never share draws.
"""

import numpy as np

from .errors import ConfigError

STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_SPLIT = 3
STREAM_DATA = 10


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"an explicit integer seed is required, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64 or not 0 <= stream < 2 ** 64:
        raise ConfigError("seed and stream must lie in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=(int(stream) << 64) | seed))
