"""Seed derivation and counter-based random streams.

Every random draw in the package comes from a Philox-4x64 generator
(numpy's ``Philox`` bit generator, 10 rounds) whose 128-bit key is derived
from a master seed and a *path* of stream names / indices.  Keys are mixed
with SplitMix64, so ``stream(seed, "projection", 3)`` is reproducible on any
platform and independent of how many threads are used or in what order
streams are requested.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (Steele, Lea & Flood 2014)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _token(item: int | str) -> int:
    if isinstance(item, str):
        return int.from_bytes(hashlib.blake2b(item.encode(), digest_size=8).digest(), "little")
    if isinstance(item, (int, np.integer)):
        return int(item) & MASK64
    raise TypeError(f"stream path items must be int or str, got {type(item).__name__}")


def derive_seed(seed: int, *path: int | str) -> int:
    """Fold ``path`` into ``seed`` and return a 64-bit child seed.

    ``derive_seed(s)`` with an empty path is ``splitmix64(s)``; each path
    element is hashed to 64 bits and mixed in turn.
    """
    state = splitmix64(int(seed) & MASK64)
    for item in path:
        state = splitmix64(state ^ splitmix64(_token(item)))
    return state


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Independent Philox generator for the named sub-stream of ``seed``."""
    hi = derive_seed(seed, *path)
    lo = splitmix64(hi)
    return np.random.Generator(np.random.Philox(key=(hi << 64) | lo))
