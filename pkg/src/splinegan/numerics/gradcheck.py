"""Central finite differences, used as the independent gradient oracle."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ConfigError, NumericsError
from .tensor import Tensor


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, eps: float = 1e-3) -> np.ndarray:
    """``(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`` for every coordinate ``i``."""
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(x0)
    flat = x0.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x0.copy()))
        flat[i] = orig - eps
        fm = float(f(x0.copy()))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericsError(f"non-finite function value at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(a, b, floor: float = 1e-12) -> float:
    """``||a - b|| / max(||a||, ||b||)``, the comparison used by gradient checks."""
    a = np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)
