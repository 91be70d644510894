"""
Seeded Randomness
Counter-based generators keyed by (seed, purpose, index)
"""

import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_int(key: Key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    return int(key)


def derive_seed(seed: int, *keys: Key) -> int:
    """Stable u64 derived from a global seed and any number of keys"""
    sequence = np.random.SeedSequence([int(seed), *[_key_int(k) for k in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    """Independent Philox stream; the same (seed, keys) always yields the same stream"""
    sequence = np.random.SeedSequence([int(seed), *[_key_int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(sequence))
