"""Counter-based random streams keyed by a path of ints/strings.

Every sub-experiment draws from ``generator(base_seed, "embedder", k, ...)``;
streams for distinct keys are independent and need no shared state, so any
piece of a sweep can be reproduced in isolation.
"""

import zlib

import numpy as np


def _word(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("seed components must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def generator(*key):
    """A Philox generator seeded from the key path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([_word(p) for p in key])))


def derive(*key):
    """A 31-bit integer seed derived from the key path."""
    return int(generator(*key).integers(0, 2**31 - 1))
