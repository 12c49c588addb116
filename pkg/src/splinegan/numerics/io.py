"""Tensor files (``.bin`` float64 LE payload + ``.json`` sidecar) and checkpoints."""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .tensor import Tensor


def save_tensor(stem, arr) -> None:
    stem = Path(stem)
    arr = np.asarray(arr.data if isinstance(arr, Tensor) else arr, dtype="<f8")
    stem.with_name(stem.name + ".bin").write_bytes(np.ascontiguousarray(arr).tobytes())
    meta = {"shape": list(arr.shape), "dtype": "f64"}
    stem.with_name(stem.name + ".json").write_text(json.dumps(meta))


def load_tensor(stem) -> np.ndarray:
    stem = Path(stem)
    try:
        meta = json.loads(stem.with_name(stem.name + ".json").read_text())
        payload = stem.with_name(stem.name + ".bin").read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read tensor {stem}: {exc}") from None
    if meta.get("dtype") != "f64":
        raise CheckpointError(f"{stem}: unsupported dtype {meta.get('dtype')!r}")
    shape = tuple(int(s) for s in meta["shape"])
    arr = np.frombuffer(payload, dtype="<f8")
    if arr.size != int(np.prod(shape)):
        raise CheckpointError(f"{stem}: payload has {arr.size} values, shape {shape}")
    return arr.reshape(shape).astype(np.float64)


def save_checkpoint(directory, tensors: dict, extra: dict | None = None) -> Path:
    """Write every tensor plus ``manifest.json`` listing names in load order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, t in tensors.items():
        save_tensor(directory / name, t)
    manifest = {"names": list(tensors)}
    if extra:
        manifest.update(extra)
    tmp = directory / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    os.replace(tmp, directory / "manifest.json")
    return directory


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint manifest {path}: {exc}") from None


def load_checkpoint(directory) -> dict[str, np.ndarray]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    return {name: load_tensor(directory / name) for name in manifest["names"]}
