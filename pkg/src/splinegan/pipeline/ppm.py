"""Binary PPM (P6, 8-bit) export."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ShapeError


def to_bytes(img) -> np.ndarray:
    """``[H, W]``, ``[C, H, W]`` (C in {1, 3}) in ``[0, 1]`` -> ``uint8 [H, W, 3]``."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[0] == 1:
            a = a[0]
        elif a.shape[0] == 3:
            a = np.moveaxis(a, 0, -1)
        else:
            raise ShapeError(f"PPM needs 1 or 3 channels, got {a.shape[0]}")
    if a.ndim == 2:
        a = np.repeat(a[..., None], 3, axis=-1)
    return np.round(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_ppm(path, img) -> Path:
    path = Path(path)
    rgb = to_bytes(img)
    h, w, _ = rgb.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())
    return path


def read_ppm(path) -> np.ndarray:
    """``uint8 [H, W, 3]`` from a file written by :func:`write_ppm`."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = (int(s) for s in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
