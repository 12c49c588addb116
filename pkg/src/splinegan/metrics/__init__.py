"""Evaluation proxies: Frechet distances on frozen random features, jitter, texture sticking."""
from .embedder import FeatureEmbedder
from .frechet import GaussianStats, frechet_distance, regularized
from .report import METRIC_KEYS, evaluate, read_metrics, select, write_metrics
from .video import (MIN_CLIPS, NOT_COMPARABLE, JitterResult, StickingResult,
                    anchor_window_metric, clip_distance, collect, fetch, fid_proxy,
                    frame_distance, fvd_proxy, lag1_autocorr, sticking_probe,
                    video_jitter_score)

__all__ = [
    "FeatureEmbedder", "GaussianStats", "JitterResult", "METRIC_KEYS", "MIN_CLIPS",
    "NOT_COMPARABLE", "StickingResult", "anchor_window_metric", "clip_distance", "collect",
    "evaluate", "fetch", "fid_proxy", "frame_distance", "frechet_distance", "fvd_proxy",
    "lag1_autocorr", "read_metrics", "regularized", "select", "sticking_probe",
    "video_jitter_score", "write_metrics",
]
