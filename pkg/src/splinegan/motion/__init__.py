"""Continuous-time motion representation: anchors, wave embedding, B-spline blending."""
from .anchors import AnchorTrack, anchor_features, delta_kernel, locate_interval, window_features
from .bspline import BSplineConfig, UniformKnots, blend, bspline_anchor, bspline_basis, bspline_weights
from .continuity import (AnchorCrossing, ContinuityReport, continuity_report, read_trajectory_csv,
                         second_difference_norms, write_trajectory_csv)
from .embedding import (MODES, MotionEmbedding, assemble, embed_batch, linear_me,
                        motion_embedding, trajectory)
from .wave import WaveHeads, wave_from_params, wave_pe

__all__ = [
    "MODES", "AnchorCrossing", "AnchorTrack", "BSplineConfig", "ContinuityReport",
    "MotionEmbedding", "UniformKnots", "WaveHeads", "anchor_features", "assemble", "blend",
    "bspline_anchor", "bspline_basis", "bspline_weights", "continuity_report", "delta_kernel",
    "embed_batch", "linear_me", "locate_interval", "motion_embedding", "read_trajectory_csv",
    "second_difference_norms", "trajectory", "wave_from_params", "wave_pe", "window_features",
    "write_trajectory_csv",
]
