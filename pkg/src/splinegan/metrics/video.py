"""FID/FVD proxies, the anchor-window FVD analog, pixel jitter and the texture-sticking probe.

A *clip source* is anything with ``clip(index, ts) -> [N, C, H, W]`` frames
in ``[0, 1]``; a plain callable ``f(index, ts)`` is accepted too.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DomainError
from ..numerics import rng as crng
from .embedder import FeatureEmbedder
from .frechet import GaussianStats, frechet_distance, regularized

MIN_CLIPS = 64
TIMELINE = 1024
NOT_COMPARABLE = ("proxy metrics from a frozen random embedder; values are only comparable "
                  "within this tool, never to published FID/FVD numbers")


def fetch(source, index: int, ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    if hasattr(source, "clip"):
        return np.asarray(source.clip(index, ts))
    return np.asarray(source(index, ts))


def clip_starts(n_clips: int, span: int, seed: int, timeline: int = TIMELINE) -> np.ndarray:
    return crng.integers(seed, "fvd-starts", span, 0, max(timeline - span, 1), n_clips)


def collect(source, n_clips: int, span: int, seed: int = 0, timeline: int = TIMELINE,
            offsets=None) -> np.ndarray:
    """Clips ``[n_clips, span, C, H, W]`` of consecutive frames.

    Clip ``i`` starts at ``offsets[i]`` when given, else at a seeded start in
    the training timeline.
    """
    starts = clip_starts(n_clips, span, seed, timeline) if offsets is None else offsets
    return np.stack([fetch(source, i, s + np.arange(span)) for i, s in enumerate(starts)])


def _check_clips(n_clips):
    if n_clips < MIN_CLIPS:
        raise ConfigError(f"Frechet proxies need n_clips >= {MIN_CLIPS}, got {n_clips}")


def clip_distance(real_clips, fake_clips, embedder: FeatureEmbedder | None = None) -> float:
    emb = embedder or FeatureEmbedder()
    s_r = regularized(GaussianStats.from_samples(emb.clips(real_clips)), "real clips")
    s_f = regularized(GaussianStats.from_samples(emb.clips(fake_clips)), "generated clips")
    return frechet_distance(s_r, s_f)


def frame_distance(real_frames, fake_frames, embedder: FeatureEmbedder | None = None) -> float:
    emb = embedder or FeatureEmbedder()
    s_r = regularized(GaussianStats.from_samples(emb.frames(real_frames)), "real frames")
    s_f = regularized(GaussianStats.from_samples(emb.frames(fake_frames)), "generated frames")
    return frechet_distance(s_r, s_f)


def fvd_proxy(real_source, model, span: int = 16, n_clips: int = MIN_CLIPS, seed: int = 0,
              embedder: FeatureEmbedder | None = None) -> float:
    """Frechet distance between embeddings of real and generated ``span``-frame clips.

    Both sides are sampled at the same seeded clip starts, so a source
    compared with itself scores exactly 0.
    """
    _check_clips(n_clips)
    if span < 2:
        raise ConfigError(f"span must be >= 2, got {span}")
    real = collect(real_source, n_clips, span, seed)
    fake = collect(model, n_clips, span, seed)
    return clip_distance(real, fake, embedder)


def fid_proxy(real_source, model, n_images: int = MIN_CLIPS, seed: int = 0,
              embedder: FeatureEmbedder | None = None) -> float:
    """Frechet distance between single-frame embeddings."""
    _check_clips(n_images)
    real = collect(real_source, n_images, 1, seed)[:, 0]
    fake = collect(model, n_images, 1, seed)[:, 0]
    return frame_distance(real, fake, embedder)


def anchor_window_metric(model, interval: float, n_clips: int = MIN_CLIPS, real_source=None,
                         span: int = 16, seed: int = 0, embedder: FeatureEmbedder | None = None):
    """``(fvd_anchor, fvd_mid)``: generated windows centred on anchors vs mid-interval.

    Anchor windows cover ``t_a - span/2 .. t_a + span/2 - 1`` (eight frames
    before and after when ``span = 16``); mid windows are the same shifted by
    ``interval / 2``.  Both use the same clip indices, so the content codes
    match.  Without ``real_source`` the anchor windows are compared with the
    mid windows directly and ``fvd_mid`` is 0.
    """
    _check_clips(n_clips)
    if span > interval:
        raise ConfigError(f"span {span} exceeds anchor interval {interval}")
    n_anchor = max(int(TIMELINE // interval) - 1, 1)
    j = crng.integers(seed, "anchor-windows", 0, 1, n_anchor + 1, n_clips)
    anchor_starts = j * interval - span // 2
    mid_starts = anchor_starts + interval / 2
    at_anchor = collect(model, n_clips, span, offsets=anchor_starts)
    at_mid = collect(model, n_clips, span, offsets=mid_starts)
    emb = embedder or FeatureEmbedder()
    if real_source is None:
        return clip_distance(at_mid, at_anchor, emb), 0.0
    real = collect(real_source, n_clips, span, seed)
    return clip_distance(real, at_anchor, emb), clip_distance(real, at_mid, emb)


@dataclass
class JitterResult:
    score: float
    times: np.ndarray
    values: np.ndarray
    phase_hist: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def argmax_time(self) -> float:
        return float(self.times[int(np.argmax(self.values))]) if self.values.size else float("nan")


def video_jitter_score(model, u, t_range, h: float = 1.0, interval: float | None = None,
                       bins: int = 8) -> JitterResult:
    """Max over ``t`` of ``mean((I(t+h) - 2 I(t) + I(t-h))^2) / h^4``.

    ``t_range`` is ``(t0, t1)``.  With ``interval``, ``phase_hist[k]`` sums
    the second-difference energy of times whose phase ``(t mod interval) /
    interval`` falls in bin ``k``; bin 0 starts at an anchor.
    """
    t0, t1 = t_range
    if not t1 > t0 or h <= 0:
        raise DomainError(f"need t0 < t1 and h > 0, got {t_range}, h={h}")
    grid = t0 + h * np.arange(int(np.floor((t1 - t0) / h + 1e-9)) + 1)
    if grid.size < 3:
        raise DomainError("jitter needs at least three grid points")
    frames = fetch(model, u, grid)
    d2 = frames[2:] - 2 * frames[1:-1] + frames[:-2]
    vals = (d2.reshape(d2.shape[0], -1) ** 2).mean(axis=1) / h ** 4
    times = grid[1:-1]
    hist = np.zeros(0)
    if interval:
        # centre bins on anchors so an anchor spike lands in bin 0
        phase = np.mod(times / interval + 0.5 / bins, 1.0)
        hist = np.bincount(np.minimum((phase * bins).astype(int), bins - 1), weights=vals,
                           minlength=bins)
    return JitterResult(float(vals.max()), times, vals, hist)


@dataclass
class StickingResult:
    timeline: np.ndarray     # [C, H, T]: column ``x`` over time, time along the width
    autocorr: float


def lag1_autocorr(series: np.ndarray) -> float:
    """Mean lag-1 autocorrelation over rows of ``[rows, T]``; constant rows count as 1."""
    s = np.asarray(series, dtype=np.float64)
    s = s - s.mean(axis=1, keepdims=True)
    num = (s[:, 1:] * s[:, :-1]).sum(axis=1)
    den = (s * s).sum(axis=1)
    tiny = den <= 1e-24
    r = np.where(tiny, 1.0, num / np.where(tiny, 1.0, den))
    return float(r.mean())


def sticking_probe(model, u, column_x: int, t_range) -> StickingResult:
    """Fixed image column over integer times ``t0 .. t1 - 1``.

    Texture sticking shows up as horizontal streaks in the timeline image
    and as high temporal autocorrelation of the column pixels.
    """
    t0, t1 = t_range
    ts = np.arange(t0, t1, dtype=np.float64)
    if ts.size < 2:
        raise DomainError(f"sticking probe needs at least two frames, got {t_range}")
    frames = fetch(model, u, ts)
    if not 0 <= column_x < frames.shape[-1]:
        raise DomainError(f"column {column_x} outside width {frames.shape[-1]}")
    col = frames[:, :, :, column_x]              # [T, C, H]
    timeline = np.moveaxis(col, 0, -1)           # [C, H, T]
    return StickingResult(timeline, lag1_autocorr(timeline.reshape(-1, ts.size)))
