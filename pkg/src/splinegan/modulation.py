"""Style-modulated 3x3 convolution: joint content+motion variant and split low-rank variant."""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import (Module, Tensor, add, as_tensor, concat, conv2d, linear, matmul, mul,
                       reshape, sqrt, sum_)
from .numerics import rng as crng
from .numerics.module import init_dense

VARIANTS = ("full", "lowrank")
DEMOD_EPS = 1e-8


class ModulatedLayer(Module):
    """Parameters of one modulated convolution.

    ``full``: base kernel ``W`` and affine ``M: (dim_u + dim_v) -> C_in``.
    ``lowrank``: content kernel ``W_co``, motion kernel ``U @ V`` reshaped to
    ``[C_out, C_in, 3, 3]`` and affines ``M_co: dim_u -> C_in``,
    ``M_mo: dim_v -> C_in``.  Affine biases start at one so styles are ~1.
    ``weight_scale`` multiplies the initial kernels (used for the
    non-demodulated output layer).
    """

    def __init__(self, c_in: int, c_out: int, dim_u: int, dim_v: int, variant: str = "full",
                 rank: int | None = None, demodulate: bool = True, seed: int = 0,
                 weight_scale: float = 1.0):
        super().__init__()
        if variant not in VARIANTS:
            raise ConfigError(f"unknown modulation variant {variant!r}")
        self.c_in, self.c_out = c_in, c_out
        self.dim_u, self.dim_v = dim_u, dim_v
        self.variant = variant
        self.demodulate = demodulate
        self.rank = rank if rank is not None else math.ceil(c_in / 8)
        g = crng.generator(seed, "modulated-layer")
        self.add_param("bias", np.zeros(c_out))
        if variant == "full":
            self.add_param("W", g.standard_normal((c_out, c_in, 3, 3)) * weight_scale)
            w, b = init_dense(g, dim_u + dim_v, c_in, bias=1.0)
            self.add_param("M.W", w)
            self.add_param("M.b", b)
        else:
            r = self.rank
            if not 1 <= r:
                raise ConfigError(f"rank must be positive, got {r}")
            self.add_param("W_co", g.standard_normal((c_out, c_in, 3, 3)) * weight_scale)
            # std r**-0.25 on each factor gives U @ V unit-variance entries, like W_co
            f = r ** -0.25 * np.sqrt(weight_scale)
            self.add_param("U", g.standard_normal((c_out, r)) * f)
            self.add_param("V", g.standard_normal((r, c_in * 9)) * f)
            w, b = init_dense(g, dim_u, c_in, bias=1.0)
            self.add_param("M_co.W", w)
            self.add_param("M_co.b", b)
            w, b = init_dense(g, dim_v, c_in, bias=1.0)
            self.add_param("M_mo.W", w)
            self.add_param("M_mo.b", b)

    def motion_kernel(self) -> Tensor:
        """``W_mo = U @ V`` reshaped to ``[C_out, C_in, 3, 3]``."""
        p = self.params
        return reshape(matmul(p["U"], p["V"]), (self.c_out, self.c_in, 3, 3))


def _as_batch(u, v):
    u, v = as_tensor(u), as_tensor(v)
    single = u.ndim == 1
    if single:
        u = reshape(u, (1, u.shape[0]))
        v = reshape(v, (1, v.shape[0]))
    if u.shape[0] != v.shape[0]:
        raise ShapeError(f"content batch {u.shape[0]} != motion batch {v.shape[0]}")
    return u, v, single


def _scale_in(kernel, s) -> Tensor:
    """Per-sample, per-input-channel scaling: ``[C_out, C_in, 3, 3] x [B, C_in]``."""
    b, cin = s.shape
    return mul(reshape(kernel, (1,) + kernel.shape), reshape(s, (b, 1, cin, 1, 1)))


def demodulate(w) -> Tensor:
    """Rescale each output filter of ``[B, C_out, C_in, 3, 3]`` to unit norm."""
    norm = sqrt(add(sum_(mul(w, w), axis=(2, 3, 4), keepdims=True), DEMOD_EPS))
    return w / norm


def modulate_full(layer: ModulatedLayer, u, v) -> Tensor:
    """``W' = W * M(u (+) v)`` per input channel, ``[B, C_out, C_in, 3, 3]``."""
    if layer.variant != "full":
        raise ConfigError("modulate_full needs a full-variant layer")
    u, v, single = _as_batch(u, v)
    p = layer.params
    if u.shape[1] + v.shape[1] != p["M.W"].shape[0]:
        raise ShapeError(f"style input {u.shape[1]}+{v.shape[1]} != {p['M.W'].shape[0]}")
    s = linear(concat([u, v], axis=1), p["M.W"], p["M.b"])
    w = _scale_in(p["W"], s)
    if layer.demodulate:
        w = demodulate(w)
    return reshape(w, w.shape[1:]) if single else w


def modulate_lowrank(layer: ModulatedLayer, u, v) -> Tensor:
    """``W' = W_co * M_co(u) + (U V) * M_mo(v)``, ``[B, C_out, C_in, 3, 3]``."""
    if layer.variant != "lowrank":
        raise ConfigError("modulate_lowrank needs a lowrank-variant layer")
    u, v, single = _as_batch(u, v)
    p = layer.params
    if u.shape[1] != p["M_co.W"].shape[0] or v.shape[1] != p["M_mo.W"].shape[0]:
        raise ShapeError("content/motion code dims do not match the affine layers")
    s_co = linear(u, p["M_co.W"], p["M_co.b"])
    s_mo = linear(v, p["M_mo.W"], p["M_mo.b"])
    w = add(_scale_in(p["W_co"], s_co), _scale_in(layer.motion_kernel(), s_mo))
    if layer.demodulate:
        w = demodulate(w)
    return reshape(w, w.shape[1:]) if single else w


def modulated_weights(layer: ModulatedLayer, u, v) -> Tensor:
    if layer.variant == "full":
        return modulate_full(layer, u, v)
    return modulate_lowrank(layer, u, v)


def modulated_conv_forward(x, layer: ModulatedLayer, u, v) -> Tensor:
    """Convolve ``x`` (``[C_in, H, W]`` or ``[B, C_in, H, W]``) with per-sample ``W'`` plus bias."""
    x = as_tensor(x)
    single = x.ndim == 3
    if single:
        x = reshape(x, (1,) + x.shape)
        u, v = reshape(as_tensor(u), (1, -1)), reshape(as_tensor(v), (1, -1))
    if x.ndim != 4 or x.shape[1] != layer.c_in:
        raise ShapeError(f"input {x.shape} does not match C_in={layer.c_in}")
    w = modulated_weights(layer, u, v)
    if w.shape[0] != x.shape[0]:
        raise ShapeError(f"style batch {w.shape[0]} != input batch {x.shape[0]}")
    out = conv2d(x, w, bias=layer.params["bias"])
    return reshape(out, out.shape[1:]) if single else out


def matricize(kernel) -> np.ndarray:
    """``[C_out, C_in, 3, 3] -> [C_out, C_in*9]``."""
    arr = kernel.data if isinstance(kernel, Tensor) else np.asarray(kernel)
    return arr.reshape(arr.shape[0], -1)
