"""Counter-based random streams keyed by ``(seed, stream, index)``.

Each key maps to an independent Philox generator: the seed and stream label
form the 128-bit key, the signed index occupies one 64-bit counter word.
Any index can be drawn directly, so anchor codes at negative or very large
positions never require generating their predecessors.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(seed: int, stream: str) -> np.ndarray:
    ss = np.random.SeedSequence([int(seed) & _MASK64, zlib.crc32(stream.encode("utf-8"))])
    return ss.generate_state(2, dtype=np.uint64)


def generator(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """A fresh generator for one ``(seed, stream, index)`` cell."""
    counter = np.array([0, 0, int(index) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed, stream), counter=counter))


def normal(seed: int, stream: str, index: int, size) -> np.ndarray:
    return generator(seed, stream, index).standard_normal(size)


def uniform(seed: int, stream: str, index: int, size, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    return generator(seed, stream, index).uniform(low, high, size)


def integers(seed: int, stream: str, index: int, low: int, high: int, size=None) -> np.ndarray:
    """Integers in ``[low, high)``."""
    return generator(seed, stream, index).integers(low, high, size)


def derive_seed(seed: int, stream: str, index: int) -> int:
    """A child seed, for objects that own their own streams."""
    return int(generator(seed, stream, index).integers(0, 2**63 - 1))
