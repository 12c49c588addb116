"""``metrics.json`` snapshots."""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigError
from .embedder import FeatureEmbedder
from .video import (MIN_CLIPS, NOT_COMPARABLE, anchor_window_metric, fid_proxy, fvd_proxy,
                    sticking_probe, video_jitter_score)

METRIC_KEYS = ("step", "fid_proxy", "fvd16_proxy", "fvd128_proxy", "fvd16_anchor_proxy",
               "fvd16_mid_proxy", "jitter", "sticking_autocorr")
GROUPS = {
    "fvd": ("fid_proxy", "fvd16_proxy", "fvd128_proxy"),
    "anchor": ("fvd16_anchor_proxy", "fvd16_mid_proxy"),
    "jitter": ("jitter", "sticking_autocorr"),
}


def select(metrics: str) -> tuple[str, ...]:
    if metrics == "all":
        return tuple(k for g in GROUPS.values() for k in g)
    if metrics == "train":
        return ("fid_proxy", "fvd16_proxy")
    if metrics not in GROUPS:
        raise ConfigError(f"unknown metric group {metrics!r}")
    return GROUPS[metrics]


def evaluate(model, real_source, step: int, interval: float, metrics: str = "all",
             n_clips: int = MIN_CLIPS, seed: int = 0, size: int = 32) -> dict:
    """One snapshot with every key of ``METRIC_KEYS``; unselected metrics are ``None``."""
    want = select(metrics)
    emb = FeatureEmbedder()
    snap = {k: None for k in METRIC_KEYS}
    snap["step"] = int(step)
    if "fid_proxy" in want:
        snap["fid_proxy"] = fid_proxy(real_source, model, n_clips, seed, emb)
    if "fvd16_proxy" in want:
        snap["fvd16_proxy"] = fvd_proxy(real_source, model, 16, n_clips, seed, emb)
    if "fvd128_proxy" in want:
        snap["fvd128_proxy"] = fvd_proxy(real_source, model, 128, n_clips, seed, emb)
    if "fvd16_anchor_proxy" in want:
        a, m = anchor_window_metric(model, interval, n_clips, real_source, 16, seed, emb)
        snap["fvd16_anchor_proxy"], snap["fvd16_mid_proxy"] = a, m
    if "jitter" in want:
        snap["jitter"] = video_jitter_score(model, 0, (0.0, 4 * interval), 1.0, interval).score
        snap["sticking_autocorr"] = sticking_probe(model, 0, size // 2, (0, 128)).autocorr
    return snap


def write_metrics(path, snapshots: list[dict]) -> None:
    doc = {"note": NOT_COMPARABLE, "snapshots": snapshots}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def read_metrics(path) -> list[dict]:
    return json.loads(Path(path).read_text())["snapshots"]
