"""Lazily extended anchor tracks over all signed integer indices."""
from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from ..errors import DomainError, ShapeError
from ..numerics import Tensor, as_tensor, conv1d, slice_axis
from ..numerics import rng as crng

ANCHOR_STREAM = "anchor"


def delta_kernel(code_dim: int, width: int = 3) -> np.ndarray:
    """Kernel ``[w, D, D]`` whose centre tap is the identity."""
    k = np.zeros((width, code_dim, code_dim))
    k[width // 2] = np.eye(code_dim)
    return k


class AnchorTrack:
    """Anchor codes ``A_i`` at timestamps ``t_i = i * interval``.

    Codes are drawn from the counter-based RNG, so ``A_i`` is a pure function
    of ``(seed, i)`` and any index (negative, or ~10^6 / interval) is
    available without touching its neighbours.  A small LRU cache holds recent
    codes; ``peak_cache_size`` records the largest occupancy seen.
    """

    def __init__(self, seed: int, code_dim: int, interval: float = 256.0, kernel=None,
                 cache_size: int = 8):
        if interval <= 0:
            raise DomainError(f"anchor interval must be positive, got {interval}")
        self.seed = int(seed)
        self.code_dim = int(code_dim)
        self.interval = float(interval)
        self.kernel = as_tensor(delta_kernel(code_dim) if kernel is None else kernel)
        if self.kernel.shape[1:] != (code_dim, code_dim):
            raise ShapeError(f"anchor kernel {self.kernel.shape} does not match code_dim {code_dim}")
        self.cache_size = int(cache_size)
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self.peak_cache_size = 0
        self.draws = 0

    def timestamp(self, i: int) -> float:
        return i * self.interval

    def raw_code(self, i: int) -> np.ndarray:
        i = int(i)
        hit = self._cache.get(i)
        if hit is not None:
            self._cache.move_to_end(i)
            return hit
        code = crng.normal(self.seed, ANCHOR_STREAM, i, self.code_dim)
        code.flags.writeable = False
        self.draws += 1
        self._cache[i] = code
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        self.peak_cache_size = max(self.peak_cache_size, len(self._cache))
        return code

    def raw_window(self, lo: int, hi: int) -> np.ndarray:
        """Codes ``A_lo .. A_hi`` stacked as ``[hi - lo + 1, D]``."""
        return np.stack([self.raw_code(i) for i in range(lo, hi + 1)])

    def features(self, i_lo: int, i_hi: int, kernel=None) -> Tensor:
        return anchor_features(self, i_lo, i_hi, kernel)


def window_features(raw: np.ndarray, kernel) -> Tensor:
    """Convolve raw code windows ``[..., n + 2, D]`` and keep the ``n`` interior rows.

    Interior rows see true neighbours on both sides, so the result does not
    depend on the padding mode or on how far the window extends.
    """
    kernel = as_tensor(kernel)
    half = kernel.shape[0] // 2
    full = conv1d(raw, kernel, padding="edge")
    axis = full.ndim - 2
    return slice_axis(full, axis, half, full.shape[axis] - half)


def anchor_features(track: AnchorTrack, i_lo: int, i_hi: int, kernel=None) -> Tensor:
    """Features ``a_i`` for ``i_lo <= i <= i_hi`` as a ``[n, D]`` tensor.

    ``a_i`` is the width-``w`` convolution of ``A_{i-w//2} .. A_{i+w//2}``
    with the track's kernel (or ``kernel`` if given).
    """
    if i_lo > i_hi:
        raise DomainError(f"empty anchor range [{i_lo}, {i_hi}]")
    kernel = track.kernel if kernel is None else as_tensor(kernel)
    half = kernel.shape[0] // 2
    raw = track.raw_window(i_lo - half, i_hi + half)
    return window_features(raw, kernel)


def locate_interval(t: float, interval: float) -> int:
    """Index ``l`` with ``l * interval <= t < (l + 1) * interval``."""
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    if isinstance(interval, AnchorTrack):
        interval = interval.interval
    l = int(math.floor(t / interval))
    # guard against t / interval rounding across an integer
    if l * interval > t:
        l -= 1
    elif (l + 1) * interval <= t:
        l += 1
    return l
