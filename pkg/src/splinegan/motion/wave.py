"""Wave positional embedding with amplitude/frequency/phase predicted from an anchor feature."""
from __future__ import annotations

import numpy as np

from ..numerics import (Module, Tensor, as_tensor, concat, cos, mlp, mul, scale, sin,
                        softplus)
from ..numerics import rng as crng
from ..numerics.module import add_mlp, mlp_layers

HEADS = ("alpha", "beta", "gamma")


class WaveHeads(Module):
    """Three single-hidden-layer MLPs ``D -> hidden -> D``.

    The frequency head is passed through softplus and multiplied by
    ``freq_scale`` (radians per frame), so every frequency is non-negative.
    """

    def __init__(self, code_dim: int, hidden: int | None = None, freq_scale: float = 1.0,
                 seed: int = 0):
        super().__init__()
        self.code_dim = code_dim
        self.hidden = hidden or 2 * code_dim
        self.freq_scale = float(freq_scale)
        g = crng.generator(seed, "wave-heads")
        for name in HEADS:
            add_mlp(self, name, g, [code_dim, self.hidden, code_dim],
                    last_bias=1.0 if name == "alpha" else 0.0)

    def __call__(self, a_ref):
        """Return ``(alpha, beta, gamma)`` for features ``a_ref`` of shape ``[..., D]``."""
        alpha = mlp(a_ref, mlp_layers(self, "alpha"))
        beta = scale(softplus(mlp(a_ref, mlp_layers(self, "beta"))), self.freq_scale)
        gamma = mlp(a_ref, mlp_layers(self, "gamma"))
        return alpha, beta, gamma


def wave_from_params(alpha, beta, gamma, t) -> Tensor:
    """``<alpha sin(beta t + gamma), alpha cos(beta t + gamma)>`` along the last axis."""
    alpha, beta, gamma = as_tensor(alpha), as_tensor(beta), as_tensor(gamma)
    t = np.asarray(t, dtype=np.float64)
    tt = as_tensor(t.reshape(t.shape + (1,)) if beta.ndim > t.ndim else t)
    phase = mul(beta, tt) + gamma
    return concat([mul(alpha, sin(phase)), mul(alpha, cos(phase))], axis=-1)


def wave_pe(a_ref, t, heads: WaveHeads) -> Tensor:
    """Positional embedding ``v_pe`` (``2D`` channels) at time ``t``.

    ``a_ref`` is ``[D]`` with scalar ``t``, or ``[B, D]`` with ``t`` of shape
    ``[B]``.
    """
    alpha, beta, gamma = heads(as_tensor(a_ref))
    return wave_from_params(alpha, beta, gamma, t)
