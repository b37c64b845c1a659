"""Stable seed derivation shared by every stage of the pipeline.

Seeds are derived by hashing the parts with BLAKE2b rather than by drawing
from a sequential RNG, so adding or removing one image never perturbs the
randomness assigned to any other image.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Map an ordered tuple of ints/strings to a stable 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        token = f"i:{part & MASK64}" if isinstance(part, int) else f"s:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def rng_from(*parts: int | str) -> np.random.Generator:
    """PCG64 generator seeded from :func:`derive_seed` of the parts."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
