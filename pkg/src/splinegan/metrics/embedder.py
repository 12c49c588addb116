"""Frozen random convolutional feature extractor (stand-in for Inception / I3D)."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..numerics import conv2d, global_avg_pool, leaky_relu, no_record
from ..numerics import rng as crng


class FeatureEmbedder:
    """Three stride-2 3x3 conv blocks, global pool, ``feature_dim`` outputs.

    Weights are drawn once from ``seed`` and never trained.  Clip embeddings
    concatenate the mean frame feature with the mean feature of successive
    frame differences, so the clip vector responds to motion.
    """

    def __init__(self, seed: int = 1234, in_channels: int = 1, channels=(8, 16, 32)):
        g = crng.generator(seed, "feature-embedder")
        self.in_channels = in_channels
        self.weights = []
        c_prev = in_channels
        for c in channels:
            w = g.standard_normal((c, c_prev, 3, 3)) * np.sqrt(2.0 / (9 * c_prev))
            w.flags.writeable = False
            self.weights.append(w)
            c_prev = c
        self.feature_dim = c_prev

    @property
    def clip_dim(self) -> int:
        return 2 * self.feature_dim

    def frames(self, x, chunk: int = 256) -> np.ndarray:
        """``[N, C, H, W] -> [N, feature_dim]``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"expected frames [N, {self.in_channels}, H, W], got {x.shape}")
        out = []
        with no_record():
            for lo in range(0, x.shape[0], chunk):
                h = x[lo:lo + chunk]
                for w in self.weights:
                    h = leaky_relu(conv2d(h, w, stride=2))
                out.append(global_avg_pool(h).data)
        return np.concatenate(out) if out else np.zeros((0, self.feature_dim))

    def clips(self, clips) -> np.ndarray:
        """``[M, T, C, H, W] -> [M, 2 * feature_dim]`` (``T >= 2``)."""
        clips = np.asarray(clips, dtype=np.float64)
        if clips.ndim != 5 or clips.shape[1] < 2:
            raise ShapeError(f"expected clips [M, T >= 2, C, H, W], got {clips.shape}")
        m, t = clips.shape[:2]
        frame_f = self.frames(clips.reshape((m * t,) + clips.shape[2:])).reshape(m, t, -1)
        diffs = np.diff(clips, axis=1)
        diff_f = self.frames(diffs.reshape((m * (t - 1),) + clips.shape[2:])).reshape(m, t - 1, -1)
        return np.concatenate([frame_f.mean(axis=1), diff_f.mean(axis=1)], axis=1)
