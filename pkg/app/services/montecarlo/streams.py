"""Counter-based random streams: path i draws from Philox keyed by (seed, i)."""

import numpy as np

MAX_SEED = 2**64


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Generator for one path, independent of batch layout and worker count."""
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"Seed must lie in [0, 2^64), got {seed}")
    if index < 0:
        raise ValueError(f"Path index must be non-negative, got {index}")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
