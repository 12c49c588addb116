"""Tiny continuous-time video generator ``I_t = G(u, v_t)``."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ShapeError
from ..modulation import ModulatedLayer, modulated_conv_forward
from ..motion import AnchorTrack, WaveHeads, assemble, delta_kernel, embed_batch
from ..numerics import Module, Tensor, as_tensor, leaky_relu, no_record, reshape, upsample2x
from ..numerics import rng as crng

MOTION_STREAM = "motion-seed"


class TinyGenerator(Module):
    """Learned 4x4 constant, ``len(channels)`` modulated blocks, modulated toRGB.

    Block 0 runs at 4x4; every later block first doubles the resolution, so
    four blocks reach 32x32.  Each frame is styled by the shared content
    code ``u`` and its own motion embedding ``v_t`` (2D channels).
    """

    def __init__(self, dim_u: int = 64, code_dim: int = 8, channels=(16, 16, 16, 8),
                 out_channels: int = 1, interval: float = 64.0, mode: str = "bspline",
                 order: int = 3, modulation: str = "full", rank: int | None = None,
                 lowrank_mask=None, freq_scale: float | None = None, seed: int = 0):
        super().__init__()
        if mode not in ("linear", "bspline"):
            raise ConfigError(f"unknown motion mode {mode!r}")
        self.dim_u, self.code_dim = dim_u, code_dim
        self.dim_v = 2 * code_dim
        self.channels = tuple(channels)
        self.out_channels = out_channels
        self.interval = float(interval)
        self.mode, self.order = mode, order
        self.modulation = modulation
        self.seed = seed
        n = len(self.channels)
        mask = [True] * n if lowrank_mask is None else list(lowrank_mask)
        if len(mask) != n:
            raise ConfigError(f"lowrank_mask has {len(mask)} entries for {n} blocks")
        g = crng.generator(seed, "generator-const")
        self.add_param("const", g.standard_normal((self.channels[0], 4, 4)))
        self.blocks = []
        c_prev = self.channels[0]
        for i, c in enumerate(self.channels):
            variant = "lowrank" if modulation == "lowrank" and mask[i] else "full"
            layer = ModulatedLayer(c_prev, c, dim_u, self.dim_v, variant, rank,
                                   seed=crng.derive_seed(seed, "generator-block", i))
            self.blocks.append(self.add_child(f"block{i}", layer))
            c_prev = c
        self.to_rgb = self.add_child("to_rgb", ModulatedLayer(
            c_prev, out_channels, dim_u, self.dim_v, "full", demodulate=False,
            seed=crng.derive_seed(seed, "generator-rgb", 0), weight_scale=(9 * c_prev) ** -0.5))
        self.reset_motion(seed)
        fs = 2 * math.pi / self.interval if freq_scale is None else freq_scale
        self.heads = self.add_child("heads", WaveHeads(code_dim, freq_scale=fs, seed=seed))

    @property
    def resolution(self) -> int:
        return 4 * 2 ** (len(self.channels) - 1)

    @property
    def n_blocks(self) -> int:
        return len(self.channels)

    def reset_motion(self, seed: int) -> None:
        """(Re)initialise the anchor kernel: identity centre tap plus small noise."""
        g = crng.generator(seed, "anchor-kernel")
        k = delta_kernel(self.code_dim) + 0.1 * g.standard_normal((3, self.code_dim, self.code_dim))
        self.add_param("anchor_kernel", k)

    def motion_params(self) -> dict[str, Tensor]:
        p = {"anchor_kernel": self.params["anchor_kernel"]}
        p.update(self.heads.named_params("heads."))
        return p

    def track(self, motion_seed: int) -> AnchorTrack:
        # the learned anchor kernel is passed to embed_batch, not stored on the track
        return AnchorTrack(motion_seed, self.code_dim, self.interval, cache_size=self.order + 2)

    def motion(self, ts, tracks) -> Tensor:
        """``v_t`` rows ``[N, 2D]`` for flat times ``ts`` on matching ``tracks``."""
        v_pe, v_me = embed_batch(ts, tracks, self.heads, self.mode, self.order,
                                 kernel=self.params["anchor_kernel"])
        return assemble(v_pe, v_me)

    def synthesize(self, u, v) -> Tensor:
        """Frames ``[N, C, H, W]`` from styles ``u [N, dim_u]`` and ``v [N, 2D]``."""
        u, v = as_tensor(u), as_tensor(v)
        if u.ndim != 2 or u.shape[1] != self.dim_u or v.shape != (u.shape[0], self.dim_v):
            raise ShapeError(f"styles u {u.shape}, v {v.shape} do not match the generator")
        n = u.shape[0]
        const = self.params["const"]
        x = reshape(const + np.zeros((n,) + const.shape), (n,) + const.shape)
        for i, layer in enumerate(self.blocks):
            if i:
                x = upsample2x(x)
            x = leaky_relu(modulated_conv_forward(x, layer, u, v))
        return modulated_conv_forward(x, self.to_rgb, u, v)

    def __call__(self, u, ts, motion_seeds) -> Tensor:
        """Clips ``[B, N_t, C, H, W]`` for ``u [B, dim_u]``, ``ts [B, N_t]`` and one motion seed per clip."""
        u = as_tensor(u)
        ts = np.asarray(ts, dtype=np.float64)
        if ts.ndim == 1:
            ts = ts[None]
        b, n_t = ts.shape
        if u.shape != (b, self.dim_u) or len(motion_seeds) != b:
            raise ShapeError(f"u {u.shape} / {len(motion_seeds)} seeds for {b} clips")
        tracks = [self.track(s) for s in motion_seeds]
        flat_tracks = [tr for tr in tracks for _ in range(n_t)]
        v = self.motion(ts.reshape(-1), flat_tracks)
        uu = reshape(reshape(u, (b, 1, self.dim_u)) + np.zeros((1, n_t, 1)), (b * n_t, self.dim_u))
        frames = self.synthesize(uu, v)
        return reshape(frames, (b, n_t) + frames.shape[1:])


def g_forward(gen: TinyGenerator, u, t_list, motion_seed: int = 0) -> Tensor:
    """Frames ``[N_t, C, H, W]`` of one clip: shared ``u``, per-frame ``v_{t_i}``."""
    u = as_tensor(u)
    out = gen(reshape(u, (1, gen.dim_u)), np.asarray(t_list, dtype=np.float64)[None],
              [motion_seed])
    return reshape(out, out.shape[1:])


def to_unit(frames) -> np.ndarray:
    """Map generator output (data range ``[-1, 1]``) to ``[0, 1]`` images."""
    arr = frames.data if isinstance(frames, Tensor) else np.asarray(frames)
    return np.clip((arr + 1.0) / 2.0, 0.0, 1.0)


class GeneratorSource:
    """Clip source over a generator: clip ``i`` uses content code and motion seed derived from ``(seed, i)``."""

    def __init__(self, gen: TinyGenerator, seed: int = 0, chunk: int = 64):
        self.gen = gen
        self.seed = seed
        self.chunk = chunk
        self.last_track = None

    def content(self, index: int) -> np.ndarray:
        return crng.normal(self.seed, "eval-content", index, self.gen.dim_u)

    def motion_seed(self, index: int) -> int:
        return crng.derive_seed(self.seed, MOTION_STREAM, index)

    def clip(self, index: int, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        u = self.content(index)
        track = self.gen.track(self.motion_seed(index))
        self.last_track = track
        out = []
        with no_record():
            for lo in range(0, ts.size, self.chunk):
                part = ts[lo:lo + self.chunk]
                v = self.gen.motion(part, [track] * part.size)
                uu = np.broadcast_to(u, (part.size, u.size))
                out.append(to_unit(self.gen.synthesize(uu, v)))
        return np.concatenate(out)
