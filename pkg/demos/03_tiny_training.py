"""A short end-to-end run: train, evaluate, then render frames far along the timeline.

Run:  python3 demos/03_tiny_training.py [out_dir]

This uses 200 steps so it finishes in about a minute; the acceptance
runs use 2000.  Metric values are proxies from a frozen random embedder
and only make sense relative to each other.
"""
import sys
from pathlib import Path

import numpy as np

from splinegan.cli import main
from splinegan.metrics import read_metrics
from splinegan.pipeline import GeneratorSource, TrainConfig, load_generator, read_losses, train

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_run")
cfg = TrainConfig(steps=200, eval_every=100, ckpt_every=100)
run = train(cfg, out, log=print)

losses = read_losses(run / "losses.csv")
print(f"\nmean loss_G / loss_D over the last 50 steps: "
      f"{losses[-50:, 1].mean():.3f} / {losses[-50:, 2].mean():.3f}")
for snap in read_metrics(run / "metrics.json"):
    print(f"step {snap['step']:4d}: fvd16_proxy {snap['fvd16_proxy']:.4f}")

# Any time is valid: only the few anchors around t are ever materialised.
gen, _, step = load_generator(run / f"ckpt_{cfg.steps}")
src = GeneratorSource(gen)
frames = src.clip(0, 1e6 + np.arange(16))
print(f"\n16 frames at t=1e6: range [{frames.min():.2f}, {frames.max():.2f}], "
      f"anchor cache peaked at {src.last_track.peak_cache_size}")

# The CLI writes the same frames as PPM images plus a column-over-time strip.
main(["gen", "--ckpt", str(run), "--t0", "1000000", "--frames", "16",
      "--out-dir", str(out / "frames")])
print(f"PPM frames and sticking.ppm written to {out / 'frames'}")
