"""Deterministic seed derivation.

Seeds are derived by hashing the parts' text, so they do not depend on
execution order, process, or Python's randomized ``hash``.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    h = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
