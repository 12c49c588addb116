"""Motion embedding ``v_t``: wave positional term plus interpolated anchor term."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DomainError
from ..numerics import Tensor, as_tensor, pad_axis, reshape, slice_axis
from .anchors import AnchorTrack, window_features
from .bspline import BSplineConfig, blend, bspline_weights
from .wave import WaveHeads, wave_pe

MODES = ("linear", "bspline")


def linear_me(a_l, a_next, t: float, t_l: float, t_next: float):
    """Convex blend with ``v(t_l) = a_l`` and ``v(t) -> a_next`` as ``t -> t_next``."""
    if not t_l <= t < t_next:
        raise DomainError(f"t={t} outside [{t_l}, {t_next})")
    span = t_next - t_l
    w_l = (t_next - t) / span
    w_r = (t - t_l) / span
    if isinstance(a_l, Tensor) or isinstance(a_next, Tensor):
        return as_tensor(a_l) * w_l + as_tensor(a_next) * w_r
    return np.asarray(a_l) * w_l + np.asarray(a_next) * w_r


@dataclass
class MotionEmbedding:
    t: float
    v_pe: Tensor
    v_me: Tensor
    mode: str

    @property
    def vector(self) -> Tensor:
        """``v_t = v_pe + [v_me, 0]``: sin half summed with ``v_me``, cos half carried."""
        return assemble(self.v_pe, self.v_me)


def assemble(v_pe, v_me) -> Tensor:
    d = v_me.shape[-1]
    return as_tensor(v_pe) + pad_axis(v_me, -1, 0, d)


def interpolation_weights(ts: np.ndarray, mode: str, order: int, interval: float):
    """First anchor index and blending weights for each time.

    Returns ``(first, w_me, ref_col)``: the anchors used at ``ts[b]`` are
    ``first[b] .. first[b] + n - 1``; ``w_me[b]`` blends them into ``v_me``
    and ``ref_col`` is the column holding ``a_l`` (linear mode only).
    """
    if mode == "linear":
        l, w = bspline_weights(ts, 2, interval)
        return l, w, 0
    if mode == "bspline":
        first, w = BSplineConfig(order, interval).active(ts)
        return first, w, None
    raise ConfigError(f"unknown motion mode {mode!r}; expected one of {MODES}")


def embed_batch(ts, tracks: Sequence[AnchorTrack], heads: WaveHeads, mode: str = "bspline",
                order: int = 3, kernel=None):
    """Batched ``(v_pe [B, 2D], v_me [B, D])`` for times ``ts[b]`` on ``tracks[b]``.

    All tracks share one anchor kernel (``kernel`` or the first track's).
    """
    ts = np.asarray(ts, dtype=np.float64).reshape(-1)
    if len(tracks) != ts.size:
        raise ConfigError(f"{ts.size} times but {len(tracks)} tracks")
    interval = tracks[0].interval
    kernel = tracks[0].kernel if kernel is None else as_tensor(kernel)
    half = kernel.shape[0] // 2
    first, w, ref_col = interpolation_weights(ts, mode, order, interval)
    n = w.shape[-1]
    raw = np.stack([tr.raw_window(int(f) - half, int(f) + n - 1 + half)
                    for tr, f in zip(tracks, first)])
    feats = window_features(raw, kernel)                   # [B, n, D]
    v_me = blend(feats, w)
    if mode == "linear":
        a_ref = reshape(slice_axis(feats, 1, ref_col, ref_col + 1), (ts.size, -1))
    else:
        a_ref = v_me
    v_pe = wave_pe(a_ref, ts, heads)
    return v_pe, v_me


def motion_embedding(t: float, mode: str, track: AnchorTrack, heads: WaveHeads,
                     cfg: BSplineConfig | None = None, kernel=None) -> MotionEmbedding:
    """``v_t`` at a single time.

    In linear mode the wave parameters come from the left anchor ``a_l`` and
    ``v_me`` is the linear blend of ``a_l, a_{l+1}``; in B-spline mode both
    use the blended feature ``a_hat(t)``.
    """
    if not np.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    order = cfg.order if cfg is not None else 3
    v_pe, v_me = embed_batch([t], [track], heads, mode, order, kernel)
    d = v_me.shape[-1]
    return MotionEmbedding(float(t), reshape(v_pe, (2 * d,)), reshape(v_me, (d,)), mode)


def trajectory(t_grid, track: AnchorTrack, heads: WaveHeads, mode: str = "bspline",
               order: int = 3, component: str = "full", kernel=None) -> np.ndarray:
    """Rows of ``v_t`` (or one component) for each time in ``t_grid``.

    ``component`` is ``"full"`` (``v_t``, 2D columns), ``"me"`` (the
    interpolated anchor term, D columns) or ``"pe"`` (2D columns).
    """
    t_grid = np.asarray(t_grid, dtype=np.float64).reshape(-1)
    if t_grid.size > 1 and np.any(np.diff(t_grid) < 0):
        raise DomainError("trajectory grid must be sorted")
    v_pe, v_me = embed_batch(t_grid, [track] * t_grid.size, heads, mode, order, kernel)
    if component == "full":
        return assemble(v_pe, v_me).data.copy()
    if component == "me":
        return v_me.data.copy()
    if component == "pe":
        return v_pe.data.copy()
    raise ConfigError(f"unknown trajectory component {component!r}")
