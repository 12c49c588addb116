"""Splitting a modulated convolution into content and low-rank motion kernels.

Run:  python3 demos/02_lowrank_modulation.py
"""
import numpy as np

from splinegan.modulation import ModulatedLayer, matricize, modulated_conv_forward

rng = np.random.default_rng(0)

# The motion kernel is U @ V, so its matricized form has rank at most r.
for r in (1, 2, 4):
    layer = ModulatedLayer(16, 8, dim_u=4, dim_v=4, variant="lowrank", rank=r, seed=r)
    s = np.linalg.svd(matricize(layer.motion_kernel()), compute_uv=False)
    print(f"rank {r}: leading singular values {np.array2string(s[:r + 2], precision=3)}")

# Motion codes only reach the output through the low-rank path.
layer = ModulatedLayer(4, 4, dim_u=4, dim_v=2, variant="lowrank", rank=1, seed=3)
x = rng.standard_normal((4, 8, 8))
u = rng.standard_normal(4)
a = modulated_conv_forward(x, layer, u, rng.standard_normal(2)).data
b = modulated_conv_forward(x, layer, u, rng.standard_normal(2)).data
print(f"\nchanging only v moves the output by {np.abs(a - b).max():.3f}")

layer.params["U"] = layer.params["U"] * 0.0
a = modulated_conv_forward(x, layer, u, rng.standard_normal(2)).data
b = modulated_conv_forward(x, layer, u, rng.standard_normal(2)).data
print(f"with U = 0 it moves it by {np.abs(a - b).max():.3g}")
