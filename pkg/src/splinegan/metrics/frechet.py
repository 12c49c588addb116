"""Gaussian feature statistics and the Frechet distance between them."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError, ShapeError

log = logging.getLogger(__name__)

PSD_TOL = 1e-10
RIDGE = 1e-6


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    count: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (self.mean.size, self.mean.size):
            raise ShapeError(f"covariance {cov.shape} does not match mean dim {self.mean.size}")
        self.cov = 0.5 * (cov + cov.T)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def from_samples(cls, x) -> "GaussianStats":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ShapeError(f"need [N >= 2, d] samples, got {x.shape}")
        return cls(x.mean(axis=0), np.cov(x, rowvar=False), x.shape[0])

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])

    def with_ridge(self, ridge: float = RIDGE) -> "GaussianStats":
        return GaussianStats(self.mean, self.cov + ridge * np.eye(self.dim), self.count)


def _psd_sqrt(a: np.ndarray, what: str) -> np.ndarray:
    w, q = np.linalg.eigh(a)
    tol = PSD_TOL * max(1.0, abs(w[-1]))
    if w[0] < -tol:
        raise NumericsError(f"{what} is not PSD (min eigenvalue {w[0]:.3g})")
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


def frechet_distance(s1: GaussianStats, s2: GaussianStats) -> float:
    """``|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))``.

    The trace term uses ``(S1 S2)^(1/2) ~ (sqrt(S1) S2 sqrt(S1))^(1/2)``,
    whose argument is symmetric, so only symmetric eigendecompositions are
    needed.
    """
    if s1.dim != s2.dim:
        raise ShapeError(f"stats dims differ: {s1.dim} vs {s2.dim}")
    r1 = _psd_sqrt(s1.cov, "first covariance")
    _psd_sqrt(s2.cov, "second covariance")
    mid = r1 @ s2.cov @ r1
    tr_cross = np.trace(_psd_sqrt(0.5 * (mid + mid.T), "covariance product"))
    diff = s1.mean - s2.mean
    d = float(diff @ diff + np.trace(s1.cov) + np.trace(s2.cov) - 2.0 * tr_cross)
    return max(d, 0.0)


def regularized(stats: GaussianStats, what: str = "stats") -> GaussianStats:
    """Add the ridge when the covariance is singular (logged)."""
    if stats.min_eig() <= RIDGE * 1e-3:
        log.info("degenerate covariance in %s: adding ridge %g", what, RIDGE)
        return stats.with_ridge()
    return stats
