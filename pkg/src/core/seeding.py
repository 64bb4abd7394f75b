"""
Seeded random streams.

Every random object in the laboratory is drawn from a Philox generator
keyed by a single 64-bit seed. Philox is counter-based: the stream index
selects a disjoint counter range, so (seed, stream) reproduces the same
draws on every platform and numpy build.
"""

import numpy as np

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Build the generator for (seed, stream).

    Args:
        seed: 64-bit seed (negative values are rejected)
        stream: Independent sub-stream index

    Returns:
        numpy Generator backed by Philox
    """
    if seed < 0 or stream < 0:
        raise ValueError(f"seed and stream must be non-negative, got seed={seed}, stream={stream}")
    key = seed & _SEED_MASK
    # counter words: [0, 0, 0, stream] keeps streams 2^192 draws apart
    counter = np.array([0, 0, 0, stream & _SEED_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
