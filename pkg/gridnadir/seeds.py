"""Fan a single master seed out to every random consumer."""

import zlib
from typing import Union

import numpy as np


def derive_seed(master: int, *labels: Union[str, int]) -> int:
    """Derive a 64-bit seed from the master seed and a fixed label path."""
    entropy = [int(master)] + [zlib.crc32(str(label).encode()) for label in labels]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def rng_for(master: int, *labels: Union[str, int]) -> np.random.Generator:
    """Random generator for one labelled consumer."""
    return np.random.default_rng(derive_seed(master, *labels))
