"""Tiny video discriminator: per-frame conv trunk with optional TSM, fused time-conditioned head."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from ..numerics import Module, Tensor, as_tensor, conv2d, global_avg_pool, leaky_relu, reshape
from ..numerics import rng as crng
from ..numerics.module import add_mlp, mlp_layers
from ..temporal import temporal_fuse, time_conditioned_logit, tsm_shift


class TinyDiscriminator(Module):
    """fromRGB, then stride-2 conv blocks (TSM before each when enabled), pool, fuse, head.

    ``tsm`` is a bool for every block or a per-block sequence of flags.
    The head sees ``N_t * C_last`` fused features plus ``N_t`` time offsets,
    so a discriminator is built for one clip length.
    """

    def __init__(self, n_frames: int = 3, in_channels: int = 1, channels=(8, 16, 16, 32, 32),
                 tsm=True, interval: float = 64.0, hidden: int = 32, seed: int = 0):
        super().__init__()
        if n_frames < 1:
            raise ConfigError(f"n_frames must be >= 1, got {n_frames}")
        n_blocks = len(channels) - 1
        mask = [bool(tsm)] * n_blocks if isinstance(tsm, (bool, int)) else [bool(m) for m in tsm]
        if len(mask) != n_blocks:
            raise ConfigError(f"TSM mask has {len(mask)} entries for {n_blocks} blocks")
        bad = [c for c, m in zip(channels[:-1], mask) if m and c % 8]
        if bad:
            raise ConfigError(f"TSM needs channel counts divisible by 8, got {bad}")
        self.n_frames = n_frames
        self.in_channels = in_channels
        self.channels = tuple(channels)
        self.tsm_mask = tuple(mask)
        self.interval = float(interval)
        g = crng.generator(seed, "discriminator")
        self._conv("from_rgb", g, in_channels, channels[0])
        for i, (a, b) in enumerate(zip(channels[:-1], channels[1:])):
            self._conv(f"block{i}", g, a, b)
        c_last = channels[-1]
        add_mlp(self, "head", g, [n_frames * c_last + n_frames, hidden, 1])

    def _conv(self, name, g, c_in, c_out):
        w = g.standard_normal((c_out, c_in, 3, 3)) * np.sqrt(2.0 / (9 * c_in))
        self.add_param(f"{name}.W", w)
        self.add_param(f"{name}.b", np.zeros(c_out))

    @property
    def n_blocks(self) -> int:
        return len(self.channels) - 1

    def features(self, x) -> Tensor:
        """Per-frame pooled features ``[B, N_t, C_last]`` for clips ``[B, N_t, C, H, W]``."""
        x = as_tensor(x)
        if x.ndim != 5 or x.shape[1] != self.n_frames or x.shape[2] != self.in_channels:
            raise ShapeError(f"expected clips [B, {self.n_frames}, {self.in_channels}, H, W], got {x.shape}")
        b, n = x.shape[:2]
        p = self.params
        h = reshape(x, (b * n,) + x.shape[2:])
        h = leaky_relu(conv2d(h, p["from_rgb.W"], bias=p["from_rgb.b"]))
        for i in range(self.n_blocks):
            if self.tsm_mask[i]:
                h = reshape(tsm_shift(reshape(h, (b, n) + h.shape[1:])), h.shape)
            h = leaky_relu(conv2d(h, p[f"block{i}.W"], stride=2, bias=p[f"block{i}.b"]))
        y = global_avg_pool(h)
        return reshape(y, (b, n, y.shape[-1]))

    def __call__(self, x, timestamps) -> Tensor:
        """Logits ``[B]`` for clips ``x`` sampled at ``timestamps [B, N_t]``."""
        y = self.features(x)
        ts = np.asarray(timestamps, dtype=np.float64)
        if ts.ndim == 1:
            ts = np.broadcast_to(ts, (y.shape[0], ts.size))
        return time_conditioned_logit(temporal_fuse(y), ts, mlp_layers(self, "head"), self.interval)
