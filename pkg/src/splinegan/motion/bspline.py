"""B-spline weights over uniform anchor knots (Cox-de Boor recursion)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError
from ..numerics import Tensor, as_tensor, mul, reshape, sum_


@dataclass(frozen=True)
class UniformKnots:
    """Knot sequence ``t_i = (i + offset) * spacing`` for every integer ``i``."""

    spacing: float
    offset: float = 0.0

    def __getitem__(self, i: int) -> float:
        return (i + self.offset) * self.spacing


@dataclass(frozen=True)
class BSplineConfig:
    order: int = 3
    interval: float = 256.0

    def __post_init__(self):
        if self.order < 2:
            raise ConfigError(f"B-spline order must be >= 2, got {self.order}")
        if not self.interval > 0:
            raise ConfigError(f"knot spacing must be positive, got {self.interval}")

    @property
    def knots(self) -> "UniformKnots":
        """Knots ``(j - order/2) * interval``.

        ``B_{i,k}`` is then supported on ``[t_i - k*interval/2, t_i + k*interval/2)``,
        i.e. centred on anchor ``i``; order 2 gives the hat function peaking at
        ``t_i``, which reproduces linear interpolation exactly.
        """
        return UniformKnots(self.interval, -self.order / 2)

    def active(self, t):
        """First anchor index with nonzero weight at ``t`` and the ``order`` weights."""
        l, w = bspline_weights(np.asarray(t, dtype=np.float64) + 0.5 * self.order * self.interval,
                               self.order, self.interval)
        return l - self.order + 1, w


def bspline_basis(i: int, k: int, t: float, knots) -> float:
    """``B_{i,k}(t)`` by direct Cox-de Boor recursion.

    ``knots`` is anything indexable by integer (an array, or
    :class:`UniformKnots`).  ``omega`` is defined as zero on degenerate
    spacing, so repeated knots are handled.
    """
    if k < 1:
        raise ConfigError(f"order must be >= 1, got {k}")
    if k == 1:
        return 1.0 if knots[i] <= t < knots[i + 1] else 0.0

    def omega(j: int, q: int) -> float:
        den = knots[j + q] - knots[j]
        return (t - knots[j]) / den if den != 0 else 0.0

    q = k - 1
    return (omega(i, q) * bspline_basis(i, q, t, knots)
            + (1.0 - omega(i + 1, q)) * bspline_basis(i + 1, q, t, knots))


def bspline_weights(t, order: int, spacing: float):
    """Nonzero basis values on uniform knots ``t_i = i * spacing``.

    Returns ``(l, w)`` where ``l = floor(t / spacing)`` and
    ``w[..., m] = B_{l - order + 1 + m, order}(t)`` for ``m = 0 .. order-1``
    (all other basis functions vanish at ``t``).  Vectorised over ``t``.
    """
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise DomainError("time must be finite")
    l = np.floor(t / spacing)
    # keep t_l <= t < t_{l+1} under rounding of t / spacing
    l = np.where(l * spacing > t, l - 1, l)
    l = np.where((l + 1) * spacing <= t, l + 1, l)
    u = t / spacing  # position in knot units
    # w holds B_{l-q+1..l, q}; start from the order-1 indicator
    w = np.ones(t.shape + (1,))
    for q in range(1, order):
        idx = l[..., None] - q + 1 + np.arange(q)             # indices i of B_{i,q}
        omega = (u[..., None] - idx) / q                      # (t - t_i) / (t_{i+q} - t_i)
        new = np.zeros(t.shape + (q + 1,))
        new[..., 1:] += omega * w                             # omega_{i,q} B_{i,q} -> B_{i,q+1}
        new[..., :q] += (1.0 - omega) * w                     # (1 - omega_{i,q}) B_{i,q} -> B_{i-1,q+1}
        w = new
    return l.astype(np.int64), w


def bspline_anchor(t: float, cfg: BSplineConfig, track, kernel=None) -> Tensor:
    """Blended anchor feature ``a_hat(t) = sum_i B_{i,k}(t) a_i`` as a ``[D]`` tensor."""
    from .anchors import anchor_features

    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    first, w = cfg.active(t)
    first = int(first)
    feats = anchor_features(track, first, first + cfg.order - 1, kernel)
    return blend(feats, w)


def blend(features, weights) -> Tensor:
    """``sum_m weights[..., m] * features[..., m, :]``."""
    features = as_tensor(features)
    weights = np.asarray(weights, dtype=np.float64)
    return sum_(mul(features, reshape(as_tensor(weights), weights.shape + (1,))), axis=-2)
