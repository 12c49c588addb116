"""Adversarial training with sparse frame sampling, lazy R1 and the pretrain -> video schedule."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import CheckpointError, ConfigError, NumericsError
from ..metrics import evaluate, write_metrics
from ..numerics import AdamState, Tape, Tensor, adam_step, backprop, no_record, scale
from ..numerics import rng as crng
from ..numerics.io import load_checkpoint, read_manifest, save_checkpoint
from .discriminator import TinyDiscriminator
from .generator import GeneratorSource, TinyGenerator
from .losses import gan_losses, r1_penalty
from .synthetic import SyntheticSource, SyntheticVideoSpec, synth_clip

LOSS_HEADER = ("step", "loss_g", "loss_d", "r1")


@dataclass
class TrainConfig:
    seed: int = 0
    data_seed: int = 0
    steps: int = 2000
    batch: int = 4
    n_t: int = 3
    r1_gamma: float = 4.0
    r1_interval: int = 16
    interval: float = 64.0
    tsm: bool = True
    motion_mode: str = "bspline"
    order: int = 3
    modulation: str = "full"
    rank: int | None = None
    allow_lowrank_linear: bool = False
    lr_g: float = 2e-3
    lr_d: float = 2e-3
    dim_u: int = 64
    code_dim: int = 8
    g_channels: tuple = (32, 32, 16, 16)
    d_channels: tuple = (16, 32, 32, 64, 64)
    timeline: int = 1024
    max_gap: int = 16
    n_train_clips: int = 512
    eval_every: int = 0
    eval_clips: int = 64
    eval_metrics: str = "train"
    ckpt_every: int = 500
    ema_half_life: float = 100.0
    pretrain: bool = False
    pretrain_steps: int | None = None
    pretrain_r1_gamma: float = 0.25
    preset: str | None = None
    init_from: str | None = field(default=None, repr=False)

    def validate(self) -> "TrainConfig":
        if self.n_t < 1:
            raise ConfigError(f"n_t must be >= 1, got {self.n_t}")
        if self.steps < 0 or self.batch < 1:
            raise ConfigError("steps must be >= 0 and batch >= 1")
        if self.motion_mode not in ("linear", "bspline"):
            raise ConfigError(f"unknown motion_mode {self.motion_mode!r}")
        if self.modulation not in ("full", "lowrank"):
            raise ConfigError(f"unknown modulation {self.modulation!r}")
        if self.modulation == "lowrank" and self.motion_mode != "bspline" \
                and not self.allow_lowrank_linear:
            raise ConfigError("lowrank modulation requires bspline motion "
                              "(set allow_lowrank_linear to override)")
        if self.order < 2:
            raise ConfigError(f"spline order must be >= 2, got {self.order}")
        if not 1 <= self.max_gap <= self.timeline // max(self.n_t, 1):
            raise ConfigError(f"max_gap {self.max_gap} incompatible with timeline {self.timeline}")
        if self.r1_interval < 1:
            raise ConfigError("r1_interval must be >= 1")
        if self.ema_half_life < 0:
            raise ConfigError("ema_half_life must be >= 0")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["g_channels"] = list(self.g_channels)
        d["d_channels"] = list(self.d_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for k in ("g_channels", "d_channels"):
            if k in d:
                d[k] = tuple(int(c) for c in d[k])
        return cls(**d).validate()

    def pretrain_stage(self) -> "TrainConfig":
        return dataclasses.replace(self, n_t=1, r1_gamma=self.pretrain_r1_gamma,
                                   steps=self.steps if self.pretrain_steps is None
                                   else self.pretrain_steps, init_from=None)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------
def sample_timesteps(rng: np.random.Generator, n_t: int, interval: float = 64.0,
                     timeline: int = 1024, max_gap: int = 16) -> np.ndarray:
    """Sorted frame times: gaps uniform on ``1..max_gap`` (capped at ``interval``), start uniform."""
    if n_t < 1:
        raise ConfigError(f"n_t must be >= 1, got {n_t}")
    hi = int(min(max_gap, interval))
    gaps = rng.integers(1, hi + 1, n_t - 1)
    span = int(gaps.sum())
    if span >= timeline:
        raise ConfigError(f"{n_t} frames with gaps up to {hi} do not fit a {timeline}-frame timeline")
    t0 = rng.integers(0, timeline - span)
    return (t0 + np.concatenate([[0], np.cumsum(gaps)])).astype(np.float64)


def real_batch(cfg: TrainConfig, spec: SyntheticVideoSpec, step: int):
    """Real clips ``[B, N_t, C, H, W]`` in ``[-1, 1]`` and their timestamps."""
    g = crng.generator(cfg.data_seed, "real-batch", step)
    ids = g.integers(0, cfg.n_train_clips, cfg.batch)
    ts = np.stack([sample_timesteps(g, cfg.n_t, cfg.interval, cfg.timeline, cfg.max_gap)
                   for _ in range(cfg.batch)])
    frames = np.stack([synth_clip(spec, int(i), t) for i, t in zip(ids, ts)])
    return 2.0 * frames - 1.0, ts


def fake_latents(cfg: TrainConfig, step: int):
    """Content codes, timestamps and motion seeds for one generated batch."""
    g = crng.generator(cfg.seed, "fake-batch", step)
    u = g.standard_normal((cfg.batch, cfg.dim_u))
    ts = np.stack([sample_timesteps(g, cfg.n_t, cfg.interval, cfg.timeline, cfg.max_gap)
                   for _ in range(cfg.batch)])
    seeds = [crng.derive_seed(cfg.seed, "train-motion", step * cfg.batch + b)
             for b in range(cfg.batch)]
    return u, ts, seeds


# ---------------------------------------------------------------------------
# models and checkpoints
# ---------------------------------------------------------------------------
def build_models(cfg: TrainConfig, init_seed: int | None = None):
    seed = cfg.seed if init_seed is None else init_seed
    gen = TinyGenerator(cfg.dim_u, cfg.code_dim, cfg.g_channels, 1, cfg.interval,
                        cfg.motion_mode, cfg.order, cfg.modulation, cfg.rank, seed=seed)
    disc = TinyDiscriminator(cfg.n_t, 1, cfg.d_channels, cfg.tsm, cfg.interval,
                             seed=crng.derive_seed(seed, "disc-init", cfg.n_t))
    return gen, disc


def deep_param_names(gen: TinyGenerator) -> list[str]:
    """Deepest ``ceil(L/2)`` blocks plus the output layer."""
    first = gen.n_blocks - math.ceil(gen.n_blocks / 2)
    names = [n for n in gen.named_params()
             if n.startswith("to_rgb.")
             or any(n.startswith(f"block{i}.") for i in range(first, gen.n_blocks))]
    return sorted(names)


def load_subset(module, flat: dict, names, prefix: str = "") -> None:
    """Rebind only ``names`` from ``flat[prefix + name]``, shape-checked."""
    current = module.named_params()
    sub = {}
    for n in names:
        key = prefix + n
        if key not in flat:
            raise CheckpointError(f"checkpoint lacks {key!r}")
        if np.shape(flat[key]) != current[n].shape:
            raise CheckpointError(f"{key!r}: shape {np.shape(flat[key])} != {current[n].shape}")
        sub[n] = flat[key]
    bind(module, sub, strict=False)


def bind(module, flat: dict, strict: bool = True) -> None:
    module.load_params(flat, "", strict)


def checkpoint_tensors(gen, disc, gen_ema=None) -> dict:
    out = {f"G.{k}": v for k, v in gen.named_params().items()}
    if gen_ema is not None:
        out.update({f"G_ema.{k}": v for k, v in gen_ema.named_params().items()})
    out.update({f"D.{k}": v for k, v in disc.named_params().items()})
    return out


def list_checkpoints(run_dir) -> list[tuple[int, Path]]:
    found = []
    for p in Path(run_dir).glob("ckpt_*"):
        m = re.fullmatch(r"ckpt_(\d+)", p.name)
        if m and (p / "manifest.json").exists():
            found.append((int(m.group(1)), p))
    return sorted(found)


def latest_checkpoint(run_dir) -> Path:
    ck = list_checkpoints(run_dir)
    if not ck:
        raise CheckpointError(f"no checkpoints in {run_dir}")
    return ck[-1][1]


def generator_weights(flat: dict, ema: bool = True) -> dict:
    """Generator tensors from a checkpoint, preferring the averaged copy."""
    prefix = "G_ema." if ema and any(k.startswith("G_ema.") for k in flat) else "G."
    return {k[len(prefix):]: v for k, v in flat.items() if k.startswith(prefix)}


def load_generator(ckpt_dir, ema: bool = True) -> tuple[TinyGenerator, TrainConfig, int]:
    """Rebuild the generator stored in a checkpoint directory (averaged weights by default)."""
    manifest = read_manifest(ckpt_dir)
    try:
        cfg = TrainConfig.from_dict(manifest["config"])
    except KeyError:
        raise CheckpointError(f"{ckpt_dir}: manifest has no config") from None
    gen, _ = build_models(cfg)
    flat = load_checkpoint(ckpt_dir)
    bind(gen, generator_weights(flat, ema))
    return gen, cfg, int(manifest.get("step", 0))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------
def _names_grads(named: dict, grads) -> dict:
    return {n: grads[t] for n, t in named.items()}


def d_step(cfg, gen, disc, real, ts_real, u, ts_fake, seeds, step):
    with no_record():
        fake = gen(u, ts_fake, seeds).data
    named = disc.named_params()
    r1_val = None
    with Tape() as tape:
        _, loss_d = gan_losses(disc(real, ts_real), disc(fake, ts_fake))
        total = loss_d
        if cfg.r1_gamma > 0 and step % cfg.r1_interval == 0:
            x = Tensor(real, requires_grad=True)
            r1 = r1_penalty(disc, x, ts_real, cfg.r1_gamma)
            r1_val = r1.item()
            total = total + scale(r1, float(cfg.r1_interval))
        grads = backprop(tape, total, wrt=list(named.values()))
    return loss_d.item(), r1_val, _names_grads(named, grads)


def g_step(gen, disc, u, ts_fake, seeds):
    named = gen.named_params()
    with Tape() as tape:
        loss_g, _ = gan_losses(np.zeros(u.shape[0]), disc(gen(u, ts_fake, seeds), ts_fake))
        grads = backprop(tape, loss_g, wrt=list(named.values()))
    return loss_g.item(), _names_grads(named, grads)


def _write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True))
    os.replace(tmp, path)


def run_manifest(cfg: TrainConfig, stage: str) -> dict:
    return {"tool": "splinegan", "version": __version__, "stage": stage,
            "seeds": {"seed": cfg.seed, "data_seed": cfg.data_seed}, "config": cfg.to_dict()}


def train(cfg: TrainConfig, out_dir, stage: str = "video", log=None) -> Path:
    """Train per ``cfg`` into ``out_dir``; returns the run directory.

    Writes ``manifest.json``, ``losses.csv`` (one row per step),
    ``ckpt_<step>/`` every ``ckpt_every`` steps plus the first and last,
    and ``metrics.json`` (snapshots at step 0, every ``eval_every`` steps and
    at the end).  Snapshots are taken on the weight-averaged generator.  A non-finite loss raises :class:`NumericsError` before
    the offending update, leaving earlier checkpoints untouched.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", run_manifest(cfg, stage))
    spec = SyntheticVideoSpec(seed=cfg.data_seed)
    gen, disc = build_models(cfg)
    loaded = []
    if cfg.init_from:
        gen, disc = build_models(cfg, init_seed=crng.derive_seed(cfg.seed, "video-init", 0))
        init = Path(cfg.init_from)
        flat = generator_weights(load_checkpoint(init if init.is_absolute() else out / init))
        loaded = deep_param_names(gen)
        load_subset(gen, flat, loaded)
    extra = {"config": cfg.to_dict(), "stage": stage, "loaded_from_pretrain": loaded}

    # evaluation and checkpoints use an exponential moving average of G's weights
    gen_ema, _ = build_models(cfg)
    bind(gen_ema, gen.named_params())
    ema_beta = 0.5 ** (1.0 / cfg.ema_half_life) if cfg.ema_half_life > 0 else 0.0
    real_src = SyntheticSource(spec, offset=cfg.n_train_clips)
    snapshots = []

    def snapshot(step):
        snap = evaluate(GeneratorSource(gen_ema, seed=cfg.seed), real_src, step, cfg.interval,
                        cfg.eval_metrics, cfg.eval_clips, seed=cfg.data_seed)
        snapshots.append(snap)
        write_metrics(out / "metrics.json", snapshots)
        if log:
            log(f"step {step}: " + ", ".join(f"{k}={v:.4g}" for k, v in snap.items()
                                             if isinstance(v, float)))

    def checkpoint(step):
        save_checkpoint(out / f"ckpt_{step}", checkpoint_tensors(gen, disc, gen_ema),
                        dict(extra, step=step))

    opt_g = AdamState(lr=cfg.lr_g)
    opt_d = AdamState(lr=cfg.lr_d)
    checkpoint(0)
    if cfg.eval_metrics != "none":
        snapshot(0)
    r1_last = 0.0
    with open(out / "losses.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_HEADER)
        for step in range(cfg.steps):
            real, ts_real = real_batch(cfg, spec, step)
            u, ts_fake, seeds = fake_latents(cfg, step)
            loss_d, r1_val, gd = d_step(cfg, gen, disc, real, ts_real, u, ts_fake, seeds, step)
            if r1_val is not None:
                r1_last = r1_val
            if not all(np.isfinite([loss_d, r1_last])):
                fh.flush()
                raise NumericsError(f"non-finite discriminator loss at step {step}; "
                                    f"last good checkpoint kept in {latest_checkpoint(out)}")
            bind(disc, adam_step(disc.named_params(), gd, opt_d))
            loss_g, gg = g_step(gen, disc, u, ts_fake, seeds)
            if not np.isfinite(loss_g):
                fh.flush()
                raise NumericsError(f"non-finite generator loss at step {step}; "
                                    f"last good checkpoint kept in {latest_checkpoint(out)}")
            bind(gen, adam_step(gen.named_params(), gg, opt_g))
            new = gen.named_params()
            bind(gen_ema, {n: ema_beta * t.data + (1.0 - ema_beta) * new[n].data
                           for n, t in gen_ema.named_params().items()})
            writer.writerow([step, repr(loss_g), repr(loss_d), repr(r1_last)])
            done = step + 1
            if cfg.ckpt_every and done % cfg.ckpt_every == 0 and done != cfg.steps:
                checkpoint(done)
            if cfg.eval_every and done % cfg.eval_every == 0 and done != cfg.steps \
                    and cfg.eval_metrics != "none":
                snapshot(done)
    if cfg.steps:
        checkpoint(cfg.steps)
        if cfg.eval_metrics != "none":
            snapshot(cfg.steps)
    return out


def video_stage(cfg: TrainConfig, pretrain_dir=None, run_dir=None) -> TrainConfig:
    """Video-stage config, warm-started from ``pretrain_dir`` when given.

    With ``run_dir`` the checkpoint path is stored relative to it, so the
    manifest (and therefore the checkpoints) do not depend on where the
    run lives.
    """
    init = None
    if pretrain_dir is not None:
        ckpt = latest_checkpoint(pretrain_dir)
        init = os.path.relpath(ckpt, run_dir) if run_dir is not None else str(ckpt)
    return dataclasses.replace(cfg, init_from=init)


def pretrain_then_finetune(cfg: TrainConfig, out_dir, log=None) -> tuple[Path, Path]:
    """Image pretraining (``N_t = 1``, small R1) then video finetuning from its deep layers."""
    out = Path(out_dir)
    pre = train(cfg.pretrain_stage(), out / "pretrain", stage="pretrain", log=log)
    vid = train(video_stage(cfg, pre, out / "video"), out / "video", stage="video", log=log)
    return pre, vid


def read_losses(path) -> np.ndarray:
    """``losses.csv`` as a ``[steps, 4]`` float array."""
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != LOSS_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[:1]}")
    return np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 4)
