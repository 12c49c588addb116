"""Continuous-time synthetic videos: drifting Gaussian blobs over a moving sinusoidal background."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..numerics import rng as crng


@dataclass(frozen=True)
class ClipLatent:
    positions: np.ndarray   # [n, 2] (x, y) pixels at t = 0
    velocities: np.ndarray  # [n, 2] pixels / frame
    radii: np.ndarray       # [n]
    intensities: np.ndarray  # [n]
    bg_direction: float     # radians
    bg_speed: float         # pixels / frame
    bg_wavelength: float    # pixels
    bg_amplitude: float = 0.15
    bg_level: float = 0.3


@dataclass(frozen=True)
class SyntheticVideoSpec:
    seed: int = 0
    size: int = 32
    channels: int = 1
    min_blobs: int = 2
    max_blobs: int = 4
    max_speed: float = 0.5
    radius_range: tuple = (2.0, 4.0)
    background: bool = True

    def latent(self, clip_id: int) -> ClipLatent:
        """Per-clip scene parameters, a pure function of ``(seed, clip_id)``."""
        g = crng.generator(self.seed, "synthetic-clip", clip_id)
        n = int(g.integers(self.min_blobs, self.max_blobs + 1))
        return ClipLatent(
            positions=g.uniform(0, self.size, (n, 2)),
            velocities=g.uniform(-self.max_speed, self.max_speed, (n, 2)),
            radii=g.uniform(*self.radius_range, n),
            intensities=g.uniform(0.5, 1.0, n),
            bg_direction=float(g.uniform(0, 2 * np.pi)),
            bg_speed=float(g.uniform(0.05, 0.3)),
            bg_wavelength=float(g.uniform(8.0, 24.0)),
            bg_amplitude=0.15 if self.background else 0.0,
            bg_level=0.3 if self.background else 0.0,
        )


def render(latent: ClipLatent, t: float, size: int = 32, channels: int = 1) -> np.ndarray:
    """Frame ``[C, H, W]`` in ``[0, 1]`` at real time ``t``; blobs wrap around the torus."""
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"frame time must be finite and >= 0, got {t}")
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    d = np.array([np.cos(latent.bg_direction), np.sin(latent.bg_direction)])
    phase = 2 * np.pi * ((xs * d[0] + ys * d[1]) - latent.bg_speed * t) / latent.bg_wavelength
    img = latent.bg_level + latent.bg_amplitude * np.sin(phase)
    centres = np.mod(latent.positions + latent.velocities * t, size)
    for (cx, cy), r, a in zip(centres, latent.radii, latent.intensities):
        dx = np.mod(xs - cx + size / 2, size) - size / 2
        dy = np.mod(ys - cy + size / 2, size) - size / 2
        img = img + a * np.exp(-(dx * dx + dy * dy) / (2 * r * r))
    img = np.clip(img, 0.0, 1.0)
    return np.repeat(img[None], channels, axis=0)


def synth_clip(spec: SyntheticVideoSpec, clip_id: int, t_list) -> np.ndarray:
    """Frames ``[N, C, H, W]`` of clip ``clip_id`` at the given times."""
    lat = spec.latent(clip_id)
    return np.stack([render(lat, t, spec.size, spec.channels) for t in np.atleast_1d(t_list)])


class SyntheticSource:
    """Clip source over a synthetic dataset: ``clip(index, ts)`` in ``[0, 1]``."""

    def __init__(self, spec: SyntheticVideoSpec, offset: int = 0):
        self.spec = spec
        self.offset = offset

    def clip(self, index: int, ts) -> np.ndarray:
        return synth_clip(self.spec, self.offset + index, ts)
