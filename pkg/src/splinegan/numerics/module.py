"""Named parameter containers.

Tensors are immutable, so an optimiser step produces new tensors which are
bound back with :meth:`Module.load_params`.
"""
from __future__ import annotations

import numpy as np

from ..errors import CheckpointError
from .tensor import Tensor


class Module:
    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.children: dict[str, Module] = {}

    def add_param(self, name: str, value) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def add_child(self, name: str, child: "Module") -> "Module":
        self.children[name] = child
        return child

    def named_params(self, prefix: str = "") -> dict[str, Tensor]:
        out = {prefix + k: v for k, v in self.params.items()}
        for cname, child in self.children.items():
            out.update(child.named_params(f"{prefix}{cname}."))
        return out

    def load_params(self, flat: dict, prefix: str = "", strict: bool = True) -> None:
        """Rebind parameters from ``flat`` (tensors or arrays), shape-checked."""
        for k, old in self.params.items():
            key = prefix + k
            if key not in flat:
                if strict:
                    raise CheckpointError(f"missing parameter {key!r}")
                continue
            val = flat[key]
            arr = val.data if isinstance(val, Tensor) else np.asarray(val, dtype=np.float64)
            if arr.shape != old.shape:
                raise CheckpointError(f"{key!r}: shape {arr.shape} != expected {old.shape}")
            self.params[k] = val if isinstance(val, Tensor) and val.requires_grad else \
                Tensor(arr, requires_grad=True, name=k)
        for cname, child in self.children.items():
            child.load_params(flat, f"{prefix}{cname}.", strict)

    def num_params(self) -> int:
        return sum(t.size for t in self.named_params().values())


def init_dense(rng: np.random.Generator, n_in: int, n_out: int, bias: float = 0.0):
    """Fan-in scaled normal weights ``[n_in, n_out]`` and a constant bias."""
    w = rng.standard_normal((n_in, n_out)) * np.sqrt(1.0 / n_in)
    return w, np.full(n_out, float(bias))


def add_mlp(module: Module, name: str, rng: np.random.Generator, sizes, last_bias: float = 0.0):
    """Register ``name.{i}.W`` / ``name.{i}.b`` for consecutive ``sizes``."""
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        w, bias = init_dense(rng, a, b, last_bias if i == len(sizes) - 2 else 0.0)
        module.add_param(f"{name}.{i}.W", w)
        module.add_param(f"{name}.{i}.b", bias)


def mlp_layers(module: Module, name: str) -> list[tuple[Tensor, Tensor]]:
    layers = []
    i = 0
    while f"{name}.{i}.W" in module.params:
        layers.append((module.params[f"{name}.{i}.W"], module.params[f"{name}.{i}.b"]))
        i += 1
    return layers
