"""Non-saturating logistic GAN losses and the R1 gradient penalty."""
from __future__ import annotations

from ..numerics import Tensor, as_tensor, backprop, mean, mul, neg, scale, softplus, sum_
from ..numerics.tensor import _active_tape


def gan_losses(d_out_real, d_out_fake) -> tuple[Tensor, Tensor]:
    """``(loss_G, loss_D)`` averaged over clips.

    ``loss_D = softplus(-l_real) + softplus(l_fake)``, ``loss_G = softplus(-l_fake)``.
    """
    real, fake = as_tensor(d_out_real), as_tensor(d_out_fake)
    loss_d = mean(softplus(neg(real))) + mean(softplus(fake))
    loss_g = mean(softplus(neg(fake)))
    return loss_g, loss_d


def r1_penalty(disc, real_frames: Tensor, t_list, gamma: float) -> Tensor:
    """``gamma / 2 * E_clip ||d l / d x||^2`` at the real clips.

    ``real_frames`` must be a leaf with ``requires_grad``; must be called
    under an active tape.  The input gradient is built with
    ``create_graph``, so the result is differentiable in the
    discriminator's parameters.
    """
    tape = _active_tape()
    if tape is None:
        raise RuntimeError("r1_penalty needs an active Tape")
    if not real_frames.requires_grad:
        raise ValueError("real_frames must require grad")
    logits = as_tensor(disc(real_frames, t_list))
    g = backprop(tape, sum_(logits), wrt=[real_frames], create_graph=True)[real_frames]
    b = real_frames.shape[0]
    sq = sum_(mul(g, g))
    return scale(sq, 0.5 * gamma / b)
