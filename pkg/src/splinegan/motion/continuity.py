"""First-order continuity diagnostics for sampled trajectories, plus CSV/JSON export."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError


@dataclass
class AnchorCrossing:
    t_anchor: float
    left_slope_norm: float
    right_slope_norm: float
    mismatch: float
    jitter: float


@dataclass
class ContinuityReport:
    h: float
    interval: float
    anchors: list[AnchorCrossing] = field(default_factory=list)
    mid_jitter: list[float] = field(default_factory=list)

    @property
    def mean_mismatch(self) -> float:
        return float(np.mean([a.mismatch for a in self.anchors])) if self.anchors else 0.0

    @property
    def anchor_jitter(self) -> float:
        return float(np.mean([a.jitter for a in self.anchors])) if self.anchors else 0.0

    @property
    def mid_interval_jitter(self) -> float:
        return float(np.mean(self.mid_jitter)) if self.mid_jitter else 0.0

    def to_dict(self) -> dict:
        mid = self.mid_interval_jitter
        return {
            "h": self.h,
            "interval": self.interval,
            "anchors": [asdict(a) for a in self.anchors],
            "summary": {
                "mean_mismatch": self.mean_mismatch,
                "anchor_jitter": self.anchor_jitter,
                "mid_jitter": mid,
                "anchor_mid_ratio": self.anchor_jitter / mid if mid > 0 else None,
            },
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _uniform_step(t_grid: np.ndarray, rtol: float = 1e-9) -> float:
    if t_grid.size < 3:
        raise ConfigError("continuity analysis needs at least three grid points")
    d = np.diff(t_grid)
    h = float(np.mean(d))
    if h <= 0 or np.max(np.abs(d - h)) > rtol * max(1.0, abs(t_grid).max()):
        raise ConfigError("grid spacing must be uniform and positive")
    return h


def second_difference_norms(values: np.ndarray, h: float) -> np.ndarray:
    """``||v[j+1] - 2 v[j] + v[j-1]|| / h^2`` for interior points (NaN at the ends)."""
    out = np.full(values.shape[0], np.nan)
    dd = values[2:] - 2.0 * values[1:-1] + values[:-2]
    out[1:-1] = np.linalg.norm(dd.reshape(dd.shape[0], -1), axis=1) / h ** 2
    return out


def continuity_report(values, t_grid, interval: float, radius: int = 1) -> ContinuityReport:
    """Slope mismatch and jitter at every anchor time strictly inside the grid.

    ``values`` is ``[len(t_grid), dim]`` sampled on a uniform grid whose step
    divides ``interval``.  For an anchor at grid index ``j`` the one-sided
    slopes are ``(v[j] - v[j-1]) / h`` and ``(v[j+1] - v[j]) / h``; ``jitter``
    is the largest scaled second difference within ``radius`` grid points.
    The same jitter window is evaluated at every mid-interval point for
    comparison.
    """
    values = np.asarray(values, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64).reshape(-1)
    if values.shape[0] != t_grid.size:
        raise ConfigError(f"{values.shape[0]} rows but {t_grid.size} grid points")
    values = values.reshape(values.shape[0], -1)
    h = _uniform_step(t_grid)
    ratio = interval / h
    if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
        raise ConfigError(f"interval {interval} is not a multiple of the grid step {h}")
    dd = second_difference_norms(values, h)
    report = ContinuityReport(h=h, interval=float(interval))

    def window_max(j):
        lo, hi = max(1, j - radius), min(t_grid.size - 2, j + radius)
        return float(np.max(dd[lo:hi + 1]))

    t0, t1 = t_grid[0], t_grid[-1]
    first = int(np.ceil((t0 + h) / interval - 1e-9))
    last = int(np.floor((t1 - h) / interval + 1e-9))
    for i in range(first, last + 1):
        ta = i * interval
        j = int(round((ta - t0) / h))
        if j < 1 or j > t_grid.size - 2:
            continue
        left = (values[j] - values[j - 1]) / h
        right = (values[j + 1] - values[j]) / h
        report.anchors.append(AnchorCrossing(
            t_anchor=float(ta),
            left_slope_norm=float(np.linalg.norm(left)),
            right_slope_norm=float(np.linalg.norm(right)),
            mismatch=float(np.linalg.norm(right - left)),
            jitter=window_max(j),
        ))
    for i in range(first - 1, last + 1):
        tm = (i + 0.5) * interval
        j = int(round((tm - t0) / h))
        if 1 <= j <= t_grid.size - 2 and abs(t_grid[j] - tm) < 1e-6 * max(1.0, abs(tm)):
            report.mid_jitter.append(window_max(j))
    return report


def write_trajectory_csv(path, t_grid, values) -> None:
    """Header ``t,dim_0,...``; every value written with 17 significant digits."""
    t_grid = np.asarray(t_grid, dtype=np.float64).reshape(-1)
    values = np.asarray(values, dtype=np.float64).reshape(t_grid.size, -1)
    header = ",".join(["t"] + [f"dim_{d}" for d in range(values.shape[1])])
    lines = [header]
    for t, row in zip(t_grid, values):
        lines.append(",".join(f"{x:.17g}" for x in (t, *row)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]
