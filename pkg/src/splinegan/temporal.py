"""Discriminator-side temporal machinery: channel shift, fusion, time-conditioned logit."""
from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .numerics import Tensor, as_tensor, concat, mlp, pad_axis, reshape, slice_axis


def tsm_shift(x) -> Tensor:
    """Shift one eighth of the channels from each temporal neighbour.

    ``x`` is ``[..., N_t, C, H, W]`` (any number of leading batch axes, or
    ``[N_t, C]`` pooled features).  Output frame ``i`` takes channels
    ``[:C/8]`` from frame ``i-1``, ``[C/8:7C/8]`` from itself and
    ``[7C/8:]`` from frame ``i+1``; neighbours outside the clip are zero.
    All reads happen before any write.
    """
    x = as_tensor(x)
    if x.ndim == 2:
        f_ax, c_ax = 0, 1
    elif x.ndim >= 4:
        f_ax, c_ax = x.ndim - 4, x.ndim - 3
    else:
        raise ShapeError(f"tsm_shift expects [..., N_t, C, H, W] or [N_t, C], got {x.shape}")
    n, c = x.shape[f_ax], x.shape[c_ax]
    if c % 8:
        raise ShapeError(f"channel count {c} is not divisible by 8")
    fold = c // 8
    head = slice_axis(x, c_ax, 0, fold)
    middle = slice_axis(x, c_ax, fold, c - fold)
    tail = slice_axis(x, c_ax, c - fold, c)
    from_prev = pad_axis(slice_axis(head, f_ax, 0, n - 1), f_ax, 1, 0)
    from_next = pad_axis(slice_axis(tail, f_ax, 1, n), f_ax, 0, 1)
    return concat([from_prev, middle, from_next], axis=c_ax)


def tsm_boundary_mask(n_frames: int, channels: int) -> np.ndarray:
    """``[N_t, C]`` mask of channels that survive the shift (zero where fed by padding)."""
    m = np.ones((n_frames, channels))
    fold = channels // 8
    m[0, :fold] = 0.0
    m[-1, channels - fold:] = 0.0
    return m


def temporal_fuse(y) -> Tensor:
    """Concatenate per-frame feature vectors in frame order: ``[..., N_t, C] -> [..., N_t*C]``."""
    y = as_tensor(y)
    if y.ndim < 2:
        raise ShapeError(f"temporal_fuse expects [..., N_t, C], got {y.shape}")
    return reshape(y, y.shape[:-2] + (y.shape[-2] * y.shape[-1],))


def time_offsets(timestamps, interval: float, raw: bool = False) -> np.ndarray:
    """``(t_i - t_0) / interval`` per clip, or the raw timestamps when ``raw``."""
    ts = np.asarray(timestamps, dtype=np.float64)
    if raw:
        return ts
    return (ts - ts[..., :1]) / interval


def time_conditioned_logit(y, timestamps, head, interval: float = 64.0, raw: bool = False) -> Tensor:
    """``l = M(y (+) tau)`` with ``tau_i`` the normalised offsets of the timestamps.

    ``y`` is the fused feature ``[..., N_t*C]``, ``timestamps`` is
    ``[..., N_t]`` and ``head`` a list of ``(W, b)`` dense layers ending in
    one output.  Returns logits of shape ``[...]``.
    """
    y = as_tensor(y)
    tau = time_offsets(timestamps, interval, raw)
    if tau.shape[:-1] != y.shape[:-1]:
        raise ShapeError(f"timestamps {tau.shape} do not match features {y.shape}")
    expect = head[0][0].shape[0]
    if y.shape[-1] + tau.shape[-1] != expect:
        raise ShapeError(f"head expects {expect} inputs, got {y.shape[-1]} + {tau.shape[-1]}")
    out = mlp(concat([y, tau], axis=-1), head)
    return reshape(out, out.shape[:-1])
