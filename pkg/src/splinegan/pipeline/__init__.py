"""Synthetic data, tiny generator / discriminator, losses and the trainer."""
from .discriminator import TinyDiscriminator
from .generator import GeneratorSource, TinyGenerator, g_forward, to_unit
from .losses import gan_losses, r1_penalty
from .ppm import read_ppm, write_ppm
from .synthetic import ClipLatent, SyntheticSource, SyntheticVideoSpec, render, synth_clip
from .train import (TrainConfig, build_models, deep_param_names, latest_checkpoint,
                    list_checkpoints, load_generator, pretrain_then_finetune, read_losses,
                    sample_timesteps, train, video_stage)

__all__ = [
    "ClipLatent", "GeneratorSource", "SyntheticSource", "SyntheticVideoSpec", "TinyDiscriminator",
    "TinyGenerator", "TrainConfig", "build_models", "deep_param_names", "g_forward", "gan_losses",
    "latest_checkpoint", "list_checkpoints", "load_generator", "pretrain_then_finetune",
    "r1_penalty", "read_losses", "read_ppm", "render", "sample_timesteps", "synth_clip", "to_unit",
    "train", "video_stage", "write_ppm",
]
