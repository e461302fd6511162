"""Counter-based random streams.

Every stochastic routine in the package draws from a Philox generator keyed by
(seed, lane).  Streams for distinct lanes are statistically independent and can
be created in any order, which makes per-trial substreams reproducible and
order-independent.
"""

from __future__ import annotations

import numpy as np

_U64 = 2**64


def check_seed(seed: int) -> int:
    """Validate and return a 64-bit unsigned seed."""
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def substream(seed: int, lane: int = 0) -> np.random.Generator:
    """Generator for the (seed, lane) substream."""
    key = np.array([check_seed(seed), lane % _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
