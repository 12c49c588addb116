"""Minimal float64 tensor engine: autodiff, layers, Adam, RNG, gradient oracle."""
from .gradcheck import finite_diff_gradient, relative_error
from .io import load_checkpoint, load_tensor, read_manifest, save_checkpoint, save_tensor
from .layers import col2im, conv1d, conv2d, global_avg_pool, im2col, linear, mlp, upsample2x
from .module import Module
from .optim import AdamState, adam_step
from .tensor import (Gradients, Tape, Tensor, add, as_tensor, backprop, broadcast_to,
                     check_finite, concat, cos, div, gather, leaky_relu, matmul, mean, mul,
                     neg, no_record, pad_axis, reshape, scale, scatter, sigmoid, sin,
                     slice_axis, softplus, sqrt, square, stack, sub, sum_, sum_to,
                     swapaxes, transpose)

__all__ = [
    "AdamState", "Gradients", "Module", "Tape", "Tensor", "adam_step", "add", "as_tensor", "backprop",
    "broadcast_to", "check_finite", "col2im", "concat", "conv1d", "conv2d", "cos", "div",
    "finite_diff_gradient", "gather", "global_avg_pool", "im2col", "leaky_relu", "linear",
    "load_checkpoint", "load_tensor", "matmul", "mean", "mlp", "mul", "neg", "no_record",
    "pad_axis", "read_manifest", "relative_error", "reshape", "save_checkpoint",
    "save_tensor", "scale", "scatter", "sigmoid", "sin", "slice_axis", "softplus", "sqrt",
    "square", "stack", "sub", "sum_", "sum_to", "swapaxes", "transpose", "upsample2x",
]
