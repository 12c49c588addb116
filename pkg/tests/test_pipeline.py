import dataclasses
import importlib

import numpy as np
import pytest
from scipy import stats

from splinegan.errors import ConfigError, DomainError, NumericsError
from splinegan.numerics import (AdamState, Tape, Tensor, adam_step, backprop, conv2d,
                                finite_diff_gradient, global_avg_pool, leaky_relu, load_checkpoint,
                                relative_error, reshape, scale, softplus, sum_)
from splinegan.numerics import rng as crng
from splinegan.pipeline import (GeneratorSource, SyntheticVideoSpec, TinyDiscriminator,
                                TinyGenerator, TrainConfig, build_models, g_forward, gan_losses,
                                load_generator, pretrain_then_finetune,
                                r1_penalty, read_losses, read_ppm, render, sample_timesteps,
                                synth_clip, train, write_ppm)
from splinegan.temporal import tsm_boundary_mask, time_conditioned_logit, temporal_fuse
from splinegan.numerics.module import mlp_layers

train_mod = importlib.import_module("splinegan.pipeline.train")
bind, d_step, deep_param_names = train_mod.bind, train_mod.d_step, train_mod.deep_param_names
fake_latents, real_batch = train_mod.fake_latents, train_mod.real_batch
generator_weights = train_mod.generator_weights


# ---------------------------------------------------------------- synthetic data
def test_synth_deterministic_and_in_range():
    spec = SyntheticVideoSpec(seed=3)
    a = synth_clip(spec, 5, [0, 1.5, 700])
    np.testing.assert_array_equal(a, synth_clip(spec, 5, [0, 1.5, 700]))
    assert a.shape == (3, 1, 32, 32) and a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, synth_clip(spec, 6, [0, 1.5, 700]))


def test_synth_static_when_nothing_moves():
    lat = SyntheticVideoSpec().latent(0)
    still = dataclasses.replace(lat, velocities=np.zeros_like(lat.velocities), bg_speed=0.0)
    np.testing.assert_array_equal(render(still, 0.0), render(still, 513.25))


def test_blob_centroid_follows_velocity():
    lat = dataclasses.replace(
        SyntheticVideoSpec(background=False).latent(0),
        positions=np.array([[12.0, 16.0]]), velocities=np.array([[0.3, -0.2]]),
        radii=np.array([2.0]), intensities=np.array([0.8]))
    ys, xs = np.mgrid[0:32, 0:32]

    def centroid(t):
        f = render(lat, t)[0]
        return np.array([(f * xs).sum(), (f * ys).sum()]) / f.sum()

    for dt in (1.0, 5.0, 10.0):
        np.testing.assert_allclose(centroid(dt) - centroid(0.0), [0.3 * dt, -0.2 * dt], atol=0.05)


def test_render_rejects_bad_time():
    lat = SyntheticVideoSpec().latent(0)
    for t in (-1.0, float("nan"), float("inf")):
        with pytest.raises(DomainError):
            render(lat, t)


def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(0).random((1, 8, 8))
    write_ppm(tmp_path / "a.ppm", img)
    back = read_ppm(tmp_path / "a.ppm")
    assert back.shape == (8, 8, 3)
    np.testing.assert_array_equal(back[..., 0], np.round(img[0] * 255).astype(np.uint8))


# ---------------------------------------------------------------- generator
@pytest.fixture(scope="module")
def gen():
    return TinyGenerator(seed=7)


def test_g_forward_deterministic_and_duplicates(gen):
    u = np.random.default_rng(0).standard_normal(gen.dim_u)
    a = g_forward(gen, u, [3.0, 3.0, 40.0], motion_seed=11).data
    b = g_forward(gen, u, [3.0, 3.0, 40.0], motion_seed=11).data
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[0], a[1])
    assert a.shape == (3, 1, 32, 32)


def test_generator_finite_over_random_inputs(gen):
    g = np.random.default_rng(1)
    u = g.standard_normal((100, gen.dim_u))
    ts = g.uniform(0, 5000, (100, 1))
    out = gen(u, ts, list(range(100))).data
    assert out.shape == (100, 1, 1, 32, 32) and np.all(np.isfinite(out))


def test_generator_source_matches_g_forward(gen):
    src = GeneratorSource(gen, seed=4)
    ts = np.array([0.0, 1.0, 65.0])
    direct = g_forward(gen, src.content(2), ts, src.motion_seed(2)).data
    np.testing.assert_allclose(src.clip(2, ts), np.clip((direct + 1) / 2, 0, 1), atol=1e-12)


def test_far_timeline_bounded_cache(gen):
    src = GeneratorSource(gen, seed=0)
    out = src.clip(0, 1e6 + np.arange(16))
    assert np.all(np.isfinite(out))
    assert src.last_track.peak_cache_size <= gen.order + 2


def test_lowrank_mask_only_on_deep_blocks():
    g = TinyGenerator(modulation="lowrank", lowrank_mask=(False, False, True, True))
    assert [b.variant for b in g.blocks] == ["full", "full", "lowrank", "lowrank"]


# ---------------------------------------------------------------- losses
def test_gan_losses_at_zero_logits():
    lg, ld = gan_losses(np.zeros(4), np.zeros(4))
    assert lg.item() == pytest.approx(np.log(2.0), abs=1e-12)
    assert ld.item() == pytest.approx(2 * np.log(2.0), abs=1e-12)


def test_gan_losses_values():
    real, fake = np.array([2.0, -1.0]), np.array([0.5, -3.0])
    sp = lambda z: np.log1p(np.exp(z))
    lg, ld = gan_losses(real, fake)
    assert lg.item() == pytest.approx(np.mean(sp(-fake)), rel=1e-12)
    assert ld.item() == pytest.approx(np.mean(sp(-real)) + np.mean(sp(fake)), rel=1e-12)


def _clip_sum(x):
    return sum_(reshape(x, (x.shape[0], -1)), axis=1)


def test_r1_zero_for_constant_discriminator():
    x = Tensor(np.random.default_rng(0).random((2, 3, 1, 8, 8)), requires_grad=True)
    with Tape():
        r = r1_penalty(lambda v, t: scale(_clip_sum(v), 0.0), x, None, 4.0)
    assert r.item() == 0.0


def test_r1_linear_discriminator():
    x = Tensor(np.random.default_rng(0).random((2, 3, 1, 8, 8)), requires_grad=True)
    with Tape():
        r = r1_penalty(lambda v, t: _clip_sum(v), x, None, 4.0)
    assert r.item() == pytest.approx(4.0 / 2 * 3 * 64, rel=1e-12)


def test_r1_needs_tape():
    x = Tensor(np.zeros((1, 1, 1, 4, 4)), requires_grad=True)
    with pytest.raises(RuntimeError):
        r1_penalty(lambda v, t: _clip_sum(v), x, None, 1.0)


def test_r1_parameter_gradient_matches_finite_differences():
    g = np.random.default_rng(2)
    xs = g.standard_normal((2, 2, 1, 6, 6))
    w0 = 0.5 * g.standard_normal((2, 1, 3, 3))

    def r1_of(w):
        def disc(v, t):
            h = reshape(v, (4, 1, 6, 6))
            return _clip_sum(reshape(softplus(conv2d(h, w)), (2, -1)))
        x = Tensor(xs, requires_grad=True)
        return r1_penalty(disc, x, None, 2.0)

    def value(w_arr):
        with Tape():
            return r1_of(Tensor(w_arr)).item()

    w = Tensor(w0, requires_grad=True)
    with Tape() as tape:
        r = r1_of(w)
        grad = backprop(tape, r, wrt=[w])[w].data
    assert relative_error(grad, finite_diff_gradient(value, w0, 1e-5)) <= 1e-4


# ---------------------------------------------------------------- discriminator
def image_discriminator_logit(disc, x, ts):
    """Reference single-frame path: TSM replaced by zeroing the channels fed by padding."""
    p = disc.params
    h = leaky_relu(conv2d(Tensor(x[:, 0]), p["from_rgb.W"], bias=p["from_rgb.b"]))
    for i in range(disc.n_blocks):
        if disc.tsm_mask[i]:
            h = h * tsm_boundary_mask(1, h.shape[1])[0][None, :, None, None]
        h = leaky_relu(conv2d(h, p[f"block{i}.W"], stride=2, bias=p[f"block{i}.b"]))
    y = reshape(global_avg_pool(h), (x.shape[0], 1, -1))
    return time_conditioned_logit(temporal_fuse(y), ts, mlp_layers(disc, "head"), disc.interval).data


def test_single_frame_video_disc_equals_image_disc():
    disc = TinyDiscriminator(n_frames=1, seed=3)
    x = np.random.default_rng(0).standard_normal((3, 1, 1, 32, 32))
    ts = np.array([[0.0], [5.0], [900.0]])
    np.testing.assert_allclose(disc(x, ts).data, image_discriminator_logit(disc, x, ts), atol=1e-12)


def test_discriminator_tsm_mask_validation():
    with pytest.raises(ConfigError):
        TinyDiscriminator(channels=(8, 12, 16), tsm=True)
    TinyDiscriminator(channels=(8, 12, 16), tsm=(True, False))
    with pytest.raises(ConfigError):
        TinyDiscriminator(channels=(8, 16, 16), tsm=(True,))


def test_discriminator_learns_with_frozen_generator():
    cfg = TrainConfig(batch=4)
    gen, disc = build_models(cfg)
    spec = SyntheticVideoSpec(seed=cfg.data_seed)
    opt = AdamState(lr=cfg.lr_d)
    losses = []
    for step in range(200):
        real, ts_real = real_batch(cfg, spec, step)
        u, ts_fake, seeds = fake_latents(cfg, step)
        loss_d, _, grads = d_step(cfg, gen, disc, real, ts_real, u, ts_fake, seeds, step)
        bind(disc, adam_step(disc.named_params(), grads, opt))
        losses.append(loss_d)
    # R1 keeps D smooth, so the loss plateaus well above zero
    assert np.mean(losses[:10]) > 1.0
    assert np.mean(losses[-20:]) < 0.5 * np.mean(losses[:10])


# ---------------------------------------------------------------- sampling
def test_sample_timesteps_basic():
    g = np.random.default_rng(0)
    assert sample_timesteps(g, 1).shape == (1,)
    for _ in range(200):
        ts = sample_timesteps(g, 4, 64.0, 1024, 16)
        gaps = np.diff(ts)
        assert np.all(gaps >= 1) and np.all(gaps <= 16) and ts[0] >= 0 and ts[-1] < 1024
    with pytest.raises(ConfigError):
        sample_timesteps(g, 0)
    with pytest.raises(ConfigError):
        sample_timesteps(g, 200, 64.0, 1024, 16)


def test_sample_timesteps_gap_distribution_uniform():
    g = np.random.default_rng(1)
    gaps = np.concatenate([np.diff(sample_timesteps(g, 3, 64.0, 1024, 16)) for _ in range(4000)])
    counts = np.bincount(gaps.astype(int), minlength=17)[1:]
    assert stats.chisquare(counts).pvalue > 0.001


# ---------------------------------------------------------------- training runs
def tiny_cfg(**kw):
    base = dict(steps=6, batch=2, ckpt_every=3, eval_metrics="none", r1_interval=2)
    base.update(kw)
    return TrainConfig(**base)


def test_training_is_deterministic(tmp_path):
    cfg = tiny_cfg(steps=10, ckpt_every=5)
    a = train(cfg, tmp_path / "a")
    b = train(cfg, tmp_path / "b")
    assert (a / "losses.csv").read_bytes() == (b / "losses.csv").read_bytes()
    for ck in ("ckpt_0", "ckpt_5", "ckpt_10"):
        for f in sorted((a / ck).iterdir()):
            assert f.read_bytes() == (b / ck / f.name).read_bytes(), f
    rows = read_losses(a / "losses.csv")
    assert rows.shape == (10, 4) and np.all(np.isfinite(rows))
    assert (a / "losses.csv").read_text().splitlines()[0] == "step,loss_g,loss_d,r1"


def test_nonfinite_loss_aborts_and_keeps_checkpoint(tmp_path, monkeypatch):
    real_losses = train_mod.gan_losses
    calls = {"n": 0}

    def poisoned(r, f):
        calls["n"] += 1
        lg, ld = real_losses(r, f)
        return (lg, ld * np.nan) if calls["n"] >= 5 else (lg, ld)

    monkeypatch.setattr(train_mod, "gan_losses", poisoned)
    with pytest.raises(NumericsError):
        train(tiny_cfg(ckpt_every=0), tmp_path / "r")
    assert (tmp_path / "r" / "ckpt_0").is_dir()
    assert len(read_losses(tmp_path / "r" / "losses.csv")) >= 1


def test_pretrain_then_finetune_loads_deep_layers(tmp_path):
    cfg = tiny_cfg(pretrain=True, steps=4, ckpt_every=0)
    pre, vid = pretrain_then_finetune(cfg, tmp_path)
    pre_w = generator_weights(load_checkpoint(pre / "ckpt_4"))
    vid_w = generator_weights(load_checkpoint(vid / "ckpt_0"))
    gen, _ = build_models(cfg)
    deep = deep_param_names(gen)
    assert deep and any(n.startswith("to_rgb") for n in deep)
    for n in deep:
        np.testing.assert_array_equal(vid_w[n], pre_w[n])
    shallow = [n for n in vid_w if n not in deep and n.startswith("block0")]
    assert any(not np.array_equal(vid_w[n], pre_w[n]) for n in shallow)

    cold = train(tiny_cfg(steps=0), tmp_path / "cold")
    warm_gen, _, _ = load_generator(vid / "ckpt_0")
    cold_gen, _, _ = load_generator(cold / "ckpt_0")
    u = crng.normal(0, "probe", 0, cfg.dim_u)
    assert not np.allclose(g_forward(warm_gen, u, [0.0]).data, g_forward(cold_gen, u, [0.0]).data)


def test_pretrain_stage_config():
    cfg = TrainConfig(pretrain=True, steps=100)
    pre = cfg.pretrain_stage()
    assert pre.n_t == 1 and pre.r1_gamma == cfg.pretrain_r1_gamma


def test_config_rejects_unknown_and_lowrank_linear():
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        TrainConfig(modulation="lowrank", motion_mode="linear").validate()
    TrainConfig(modulation="lowrank", motion_mode="linear", allow_lowrank_linear=True).validate()
    cfg = TrainConfig(seed=9, g_channels=(8, 8))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
