"""Convolution, resampling and dense-layer helpers built on gather + matmul.

Lowering every spatial op onto :func:`gather` keeps the set of primitive
backward rules closed (gather <-> scatter, matmul <-> matmul), so the
layers below are differentiable to any order without dedicated transposed
convolution kernels.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ConfigError, ShapeError
from .tensor import Tensor, add, as_tensor, gather, leaky_relu, matmul, mean, reshape


# ---------------------------------------------------------------------------
# conv1d
# ---------------------------------------------------------------------------
@lru_cache(maxsize=64)
def _conv1d_index(lead: int, length: int, cin: int, width: int, padding: str) -> np.ndarray:
    half = width // 2
    pos = np.arange(length)[:, None] + np.arange(-half, half + 1)[None, :]  # L x w
    size = lead * length * cin
    if padding == "zero":
        valid = (pos >= 0) & (pos < length)
        pos = np.clip(pos, 0, length - 1)
    elif padding == "edge":
        valid = np.ones_like(pos, dtype=bool)
        pos = np.clip(pos, 0, length - 1)
    else:
        raise ConfigError(f"unknown conv1d padding {padding!r}")
    base = np.arange(lead)[:, None, None, None] * (length * cin)
    idx = base + pos[None, :, :, None] * cin + np.arange(cin)[None, None, None, :]
    idx = np.where(valid[None, :, :, None], idx, size)
    idx = idx.reshape(lead, length, width * cin)
    idx.flags.writeable = False
    return idx


def conv1d(x, k, padding: str = "zero") -> Tensor:
    """Same-length 1-D convolution (cross-correlation) along the first data axis.

    ``x`` is ``[L, C_in]`` (or ``[B, L, C_in]``) and ``k`` is
    ``[w, C_in, C_out]`` with odd ``w``.  ``padding`` is ``"zero"`` or
    ``"edge"`` (neighbour-extend: out-of-range taps repeat the end sample).
    """
    x, k = as_tensor(x), as_tensor(k)
    if k.ndim != 3:
        raise ShapeError(f"conv1d kernel must be [w, C_in, C_out], got {k.shape}")
    width, cin, cout = k.shape
    if width % 2 == 0:
        raise ConfigError(f"conv1d kernel width must be odd, got {width}")
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[2] != cin:
        raise ShapeError(f"conv1d input {x.shape} incompatible with kernel {k.shape}")
    lead, length, _ = x.shape
    cols = gather(x, _conv1d_index(lead, length, cin, width, padding))
    out = matmul(cols, reshape(k, (width * cin, cout)))
    return reshape(out, (length, cout)) if squeeze else out


# ---------------------------------------------------------------------------
# conv2d
# ---------------------------------------------------------------------------
def _im2col_array(x: np.ndarray, stride: int) -> np.ndarray:
    b, c, h, w = x.shape
    ho, wo = h // stride, w // stride
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    taps = [xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
            for i in range(3) for j in range(3)]
    return np.stack(taps, axis=2).reshape(b, c * 9, ho * wo)


def _col2im_array(cols: np.ndarray, shape: tuple[int, ...], stride: int) -> np.ndarray:
    b, c, h, w = shape
    ho, wo = h // stride, w // stride
    cols = cols.reshape(b, c, 3, 3, ho, wo)
    out = np.zeros((b, c, h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out[:, :, 1:h + 1, 1:w + 1]


def _check_stride(shape, stride):
    if stride not in (1, 2):
        raise ConfigError(f"stride must be 1 or 2, got {stride}")
    h, w = shape[-2:]
    if stride == 2 and (h % 2 or w % 2):
        raise ShapeError(f"stride-2 convolution needs even spatial extent, got {h}x{w}")


def im2col(x, stride: int = 1) -> Tensor:
    """Unfold 3x3 zero-padded patches: ``[B, C, H, W] -> [B, C*9, Ho*Wo]``.

    Rows are ordered ``(channel, ky, kx)``.  The backward rule is
    :func:`col2im` and vice versa, so the pair is closed under
    differentiation.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"im2col input must be [B, C, H, W], got {x.shape}")
    _check_stride(x.shape, stride)
    return Tensor._make(_im2col_array(x.data, stride), (x,),
                        lambda g: (col2im(g, x.shape, stride),))


def col2im(cols, shape: tuple[int, ...], stride: int = 1) -> Tensor:
    """Adjoint of :func:`im2col`: sum patch entries back onto the image."""
    cols = as_tensor(cols)
    shape = tuple(shape)
    _check_stride(shape, stride)
    b, c, h, w = shape
    expect = (b, c * 9, (h // stride) * (w // stride))
    if cols.shape != expect:
        raise ShapeError(f"col2im expects {expect}, got {cols.shape}")
    return Tensor._make(_col2im_array(cols.data, shape, stride), (cols,),
                        lambda g: (im2col(g, stride),))


def conv2d(x, k, stride: int = 1, bias=None) -> Tensor:
    """3x3 convolution with zero padding 1.

    ``x`` is ``[C_in, H, W]`` or ``[B, C_in, H, W]``; ``k`` is
    ``[C_out, C_in, 3, 3]`` shared across the batch, or
    ``[B, C_out, C_in, 3, 3]`` for per-sample kernels (modulated layers).
    """
    x, k = as_tensor(x), as_tensor(k)
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be [B, C, H, W], got {x.shape}")
    b, cin, h, w = x.shape
    if k.ndim == 4:
        cout = k.shape[0]
        if k.shape[1:] != (cin, 3, 3):
            raise ShapeError(f"kernel {k.shape} incompatible with input channels {cin}")
        kmat = reshape(k, (cout, cin * 9))
    elif k.ndim == 5:
        if k.shape[0] != b or k.shape[2:] != (cin, 3, 3):
            raise ShapeError(f"per-sample kernel {k.shape} incompatible with input {x.shape}")
        cout = k.shape[1]
        kmat = reshape(k, (b, cout, cin * 9))
    else:
        raise ShapeError(f"conv2d kernel must be 4-D or 5-D, got {k.shape}")
    cols = im2col(x, stride)
    out = matmul(kmat, cols)
    out = reshape(out, (b, cout, h // stride, w // stride))
    if bias is not None:
        out = add(out, reshape(as_tensor(bias), (1, cout, 1, 1)))
    return reshape(out, out.shape[1:]) if squeeze else out


# ---------------------------------------------------------------------------
# resampling / pooling
# ---------------------------------------------------------------------------
@lru_cache(maxsize=64)
def _upsample_index(lead: int, h: int, w: int) -> np.ndarray:
    ys = np.repeat(np.arange(h), 2)
    xs = np.repeat(np.arange(w), 2)
    idx = (np.arange(lead)[:, None, None] * (h * w) + ys[None, :, None] * w + xs[None, None, :])
    idx.flags.writeable = False
    return idx


def upsample2x(x) -> Tensor:
    """Nearest-neighbour 2x upsampling of the last two axes."""
    x = as_tensor(x)
    *lead, h, w = x.shape
    n = int(np.prod(lead)) if lead else 1
    out = gather(x, _upsample_index(n, h, w))
    return reshape(out, tuple(lead) + (2 * h, 2 * w))


def global_avg_pool(x) -> Tensor:
    return mean(x, axis=(-2, -1))


# ---------------------------------------------------------------------------
# dense layers
# ---------------------------------------------------------------------------
def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as ``[in, out]``."""
    x = as_tensor(x)
    squeeze = x.ndim == 1
    if squeeze:
        x = reshape(x, (1, x.shape[0]))
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, out.shape[1:]) if squeeze else out


def mlp(x, layers, slope: float = 0.2) -> Tensor:
    """Apply ``[(W, b), ...]`` with leaky ReLU between (not after) layers."""
    h = x
    for i, (w, b) in enumerate(layers):
        h = linear(h, w, b)
        if i < len(layers) - 1:
            h = leaky_relu(h, slope)
    return h

