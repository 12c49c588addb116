"""Command-line entry point: ``splinegan {trajectory,train,eval,gen}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric or
checkpoint failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CheckpointError, ConfigError, DomainError, NumericsError, ShapeError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

# Ladder presets (config-b, the alias-free generator, is not provided).
PRESETS = {
    "config-a": dict(motion_mode="linear", tsm=False, modulation="full", pretrain=False),
    "config-c": dict(motion_mode="linear", tsm=False, modulation="full", pretrain=True),
    "config-d": dict(motion_mode="linear", tsm=True, modulation="full", pretrain=True),
    "config-e": dict(motion_mode="bspline", tsm=True, modulation="full", pretrain=True),
    "config-f": dict(motion_mode="bspline", tsm=True, modulation="lowrank", pretrain=True),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="splinegan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("trajectory", help="export a motion-embedding trajectory and its continuity report")
    t.add_argument("--seed", type=int, default=0, help="anchor / wave-head seed")
    t.add_argument("--mode", choices=("linear", "bspline"), default="bspline")
    t.add_argument("--order", type=int, default=3, help="B-spline order k (2 = linear)")
    t.add_argument("--interval", type=float, default=64.0, help="anchor spacing in frames")
    t.add_argument("--t0", type=float, default=0.0)
    t.add_argument("--t1", type=float, default=256.0)
    t.add_argument("--step", type=float, default=0.25, help="grid spacing; must divide the interval")
    t.add_argument("--code-dim", type=int, default=8)
    t.add_argument("--component", choices=("me", "pe", "full"), default="me",
                   help="interpolated anchor term (me), wave term (pe) or their sum (full)")
    t.add_argument("--out", required=True, help="output directory")

    tr = sub.add_parser("train", help="train a model from a JSON config")
    tr.add_argument("--config", required=True,
                    help="JSON file of TrainConfig fields; an optional 'preset' key selects config-a/c/d/e/f")
    tr.add_argument("--out", required=True, help="run directory")
    tr.add_argument("--stage", choices=("pretrain", "video", "both"), default="both")
    tr.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate a checkpoint into metrics.json")
    e.add_argument("--ckpt", required=True, help="ckpt_<step> directory or a run directory (latest)")
    e.add_argument("--metrics", choices=("all", "fvd", "anchor", "jitter"), default="all")
    e.add_argument("--n-clips", type=int, default=64)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="output directory or .json path")

    g = sub.add_parser("gen", help="write generated frames as PPM plus a texture-sticking timeline")
    g.add_argument("--ckpt", required=True)
    g.add_argument("--u-seed", type=int, default=0, help="content code / motion seed index")
    g.add_argument("--t0", type=float, default=0.0, help="first frame time (any size)")
    g.add_argument("--frames", type=int, default=16)
    g.add_argument("--fps-units", type=float, default=1.0, help="time step between frames, in frames")
    g.add_argument("--column", type=int, default=None, help="sticking-probe column (default: centre)")
    g.add_argument("--out-dir", required=True)
    return p


def resolve_config(raw: dict):
    from .pipeline import TrainConfig
    raw = dict(raw)
    preset = raw.get("preset")
    base = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = dict(PRESETS[preset])
    base.update(raw)
    return TrainConfig.from_dict(base)


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(raw)


def cmd_trajectory(args) -> int:
    from .motion import AnchorTrack, WaveHeads, continuity_report, trajectory, write_trajectory_csv
    if not args.t0 < args.t1:
        raise ConfigError(f"need t0 < t1, got {args.t0} >= {args.t1}")
    if args.step <= 0:
        raise ConfigError("step must be positive")
    n = int(round((args.t1 - args.t0) / args.step))
    grid = args.t0 + args.step * np.arange(n + 1)
    order = 2 if args.mode == "linear" else args.order
    track = AnchorTrack(args.seed, args.code_dim, args.interval)
    heads = WaveHeads(args.code_dim, freq_scale=2 * math.pi / args.interval, seed=args.seed)
    values = trajectory(grid, track, heads, args.mode, order, args.component)
    report = continuity_report(values, grid, args.interval)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", grid, values)
    report.write_json(out / "continuity.json")
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import latest_checkpoint, train, video_stage
    cfg = load_config(args.config)
    out = Path(args.out)
    log = None if args.quiet else (lambda s: print(s, file=sys.stderr))
    if args.stage in ("pretrain", "both") and cfg.pretrain:
        train(cfg.pretrain_stage(), out / "pretrain", stage="pretrain", log=log)
    elif args.stage == "pretrain":
        raise ConfigError("config has pretrain disabled; nothing to do for --stage pretrain")
    if args.stage in ("video", "both"):
        pre = None
        if cfg.pretrain:
            pre = out / "pretrain"
            try:
                latest_checkpoint(pre)
            except CheckpointError:
                raise ConfigError(f"no pretraining checkpoint in {pre}; run --stage pretrain first") from None
        train(video_stage(cfg, pre, out / "video"), out / "video", stage="video", log=log)
    return EXIT_OK


def _ckpt_dir(path) -> Path:
    from .pipeline import latest_checkpoint
    p = Path(path)
    if not p.exists():
        raise CheckpointError(f"checkpoint {p} does not exist")
    if (p / "manifest.json").exists() and "names" in json.loads((p / "manifest.json").read_text()):
        return p
    for sub in ("", "video", "pretrain"):
        try:
            return latest_checkpoint(p / sub)
        except CheckpointError:
            continue
    raise CheckpointError(f"no checkpoint found under {p}")


def cmd_eval(args) -> int:
    from .metrics import evaluate, write_metrics
    from .pipeline import GeneratorSource, SyntheticSource, SyntheticVideoSpec, load_generator
    gen, cfg, step = load_generator(_ckpt_dir(args.ckpt))
    real = SyntheticSource(SyntheticVideoSpec(seed=cfg.data_seed), offset=cfg.n_train_clips)
    snap = evaluate(GeneratorSource(gen, seed=args.seed), real, step, cfg.interval,
                    args.metrics, args.n_clips, seed=cfg.data_seed, size=gen.resolution)
    if args.metrics != "all":
        from .metrics.report import select
        keep = set(select(args.metrics)) | {"step"}
        snap = {k: v for k, v in snap.items() if k in keep}
    out = Path(args.out)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "metrics.json"
    write_metrics(out, [snap])
    return EXIT_OK


def cmd_gen(args) -> int:
    from .metrics import lag1_autocorr
    from .pipeline import GeneratorSource, load_generator, write_ppm
    if args.frames < 1:
        raise ConfigError(f"--frames must be >= 1, got {args.frames}")
    if args.fps_units <= 0 or not math.isfinite(args.t0) or args.t0 < 0:
        raise ConfigError("need t0 >= 0 and a positive --fps-units")
    gen, _, _ = load_generator(_ckpt_dir(args.ckpt))
    src = GeneratorSource(gen, seed=0)
    ts = args.t0 + args.fps_units * np.arange(args.frames)
    frames = src.clip(args.u_seed, ts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        write_ppm(out / f"frame_{i:05d}.ppm", f)
    x = frames.shape[-1] // 2 if args.column is None else args.column
    if not 0 <= x < frames.shape[-1]:
        raise ConfigError(f"--column {x} outside width {frames.shape[-1]}")
    timeline = np.moveaxis(frames[:, :, :, x], 0, -1)      # [C, H, T]
    write_ppm(out / "sticking.ppm", timeline)
    info = {"t0": args.t0, "frames": args.frames, "column": x,
            "sticking_autocorr": lag1_autocorr(timeline.reshape(-1, args.frames))
            if args.frames > 1 else None,
            "peak_anchor_cache": src.last_track.peak_cache_size,
            "anchor_draws": src.last_track.draws}
    (out / "gen.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"trajectory": cmd_trajectory, "train": cmd_train, "eval": cmd_eval, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"splinegan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"splinegan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericsError, CheckpointError, ShapeError) as exc:
        print(f"splinegan: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
