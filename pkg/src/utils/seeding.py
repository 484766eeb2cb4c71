import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]

SEED_MASK = (1 << 63) - 1


def _entropy(key: Key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    if key < 0:
        raise ValueError(f"seed keys must be non-negative, got {key}")
    return int(key)


def derive_seed(seed: int, *keys: Key) -> int:
    """
    Stable child seed for (seed, keys...), e.g. derive_seed(7, "pair", 12).

    Derivation depends only on the values, never on call order, so work can be
    spread over threads without changing results.
    """
    sequence = np.random.SeedSequence([_entropy(seed & SEED_MASK)] + [_entropy(k) for k in keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) & SEED_MASK


def rng_for(seed: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
