import json

import numpy as np
import pytest

from splinegan.errors import (CheckpointError, ConfigError, ContractError, NumericsError,
                              ShapeError)
from splinegan.numerics import (AdamState, Module, Tape, Tensor, adam_step, add, backprop,
                                check_finite, col2im, conv1d, conv2d, cos, finite_diff_gradient,
                                im2col, leaky_relu, linear, load_checkpoint, load_tensor, matmul,
                                mlp, mul, no_record, relative_error, save_checkpoint,
                                save_tensor, scale, sin, softplus, sqrt, square, sub, sum_,
                                upsample2x)
from splinegan.numerics import rng as crng
from conftest import grad_check


# -- elementwise ------------------------------------------------------------
def test_sin_cos_at_zero():
    assert sin(Tensor(0.0)).item() == 0.0
    assert cos(Tensor(0.0)).item() == 1.0


def test_add_arithmetic():
    np.testing.assert_array_equal(add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data, [4.0, 6.0])


def test_sin_derivative_matches_finite_difference():
    x = Tensor(np.array(0.3), requires_grad=True)
    with Tape() as tape:
        g = backprop(tape, sin(x), wrt=[x])[x].item()
    fd = finite_diff_gradient(lambda a: np.sin(a).item(), np.array(0.3))
    assert abs(g - fd) / abs(fd) <= 1e-6
    assert g == pytest.approx(np.cos(0.3), rel=1e-14)


@pytest.mark.parametrize("op", [
    lambda a, b: sum_(add(a, b) * a),
    lambda a, b: sum_(sub(a, b) * b),
    lambda a, b: sum_(mul(a, b)),
    lambda a, b: sum_(scale(a, 2.5) * b),
    lambda a, b: sum_(sin(a) * cos(b)),
    lambda a, b: sum_(leaky_relu(a) * b),
    lambda a, b: sum_(softplus(a) * b),
    lambda a, b: sum_(square(a) * b),
    lambda a, b: sum_(sqrt(square(a) + 1.0) * b),
])
def test_elementwise_gradients(op, rng):
    a = rng.uniform(-1, 1, (3, 4))
    b = rng.uniform(-1, 1, (3, 4))
    assert grad_check(op, a, b) <= 1e-4


def test_leaky_relu_slope():
    np.testing.assert_allclose(leaky_relu(Tensor([-1.0, 2.0])).data, [-0.2, 2.0])


def test_incompatible_shapes_raise():
    with pytest.raises(ShapeError):
        add(Tensor(np.ones(3)), Tensor(np.ones(4)))


def test_tensor_data_is_immutable():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_check_finite():
    check_finite(Tensor([1.0]))
    with pytest.raises(NumericsError):
        check_finite(Tensor([1.0, np.nan]))


# -- matmul -----------------------------------------------------------------
def test_matmul_identity_and_arithmetic(rng):
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(matmul(Tensor(np.eye(4)), Tensor(x)).data, x)
    out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    np.testing.assert_array_equal(out.data, [[3.0], [7.0]])


def test_matmul_matches_triple_loop(rng):
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 3))
    ref = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(4):
                ref[i, j] += a[i, k] * b[k, j]
    np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, ref, rtol=0, atol=1e-14)


def test_matmul_inner_mismatch():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_matmul_gradient(rng):
    assert grad_check(lambda a, b: sum_(square(matmul(a, b))),
                      rng.uniform(-1, 1, (5, 4)), rng.uniform(-1, 1, (4, 3))) <= 1e-4


# -- conv1d -----------------------------------------------------------------
def test_conv1d_box_kernel():
    out = conv1d(Tensor([[1.0], [2.0], [3.0]]), Tensor(np.ones((3, 1, 1))))
    np.testing.assert_array_equal(out.data[:, 0], [3.0, 6.0, 5.0])


def test_conv1d_delta_kernel_is_identity(rng):
    x = rng.normal(size=(7, 1))
    k = np.array([0.0, 1.0, 0.0]).reshape(3, 1, 1)
    np.testing.assert_array_equal(conv1d(Tensor(x), Tensor(k)).data, x)


def test_conv1d_edge_padding():
    out = conv1d(Tensor([[1.0], [2.0], [3.0]]), Tensor(np.ones((3, 1, 1))), padding="edge")
    np.testing.assert_array_equal(out.data[:, 0], [4.0, 6.0, 8.0])


def test_conv1d_even_width_rejected():
    with pytest.raises(ConfigError):
        conv1d(Tensor(np.ones((4, 1))), Tensor(np.ones((2, 1, 1))))


@pytest.mark.parametrize("padding", ["zero", "edge"])
def test_conv1d_gradient(padding, rng):
    assert grad_check(lambda x, k: sum_(square(conv1d(x, k, padding))),
                      rng.uniform(-1, 1, (6, 2)), rng.uniform(-1, 1, (3, 2, 3))) <= 1e-4


# -- conv2d -----------------------------------------------------------------
def conv2d_loop(x, k, stride=1):
    cin, h, w = x.shape
    cout = k.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((cout, h // stride, w // stride))
    for o in range(cout):
        for i in range(h // stride):
            for j in range(w // stride):
                for c in range(cin):
                    for dy in range(3):
                        for dx in range(3):
                            out[o, i, j] += k[o, c, dy, dx] * xp[c, i * stride + dy, j * stride + dx]
    return out


def test_conv2d_zero_input():
    assert not conv2d(Tensor(np.zeros((2, 4, 4))), Tensor(np.ones((3, 2, 3, 3)))).data.any()


def test_conv2d_delta_kernel(rng):
    x = rng.normal(size=(2, 5, 5))
    k = np.zeros((1, 2, 3, 3))
    k[0, 1, 1, 1] = 1.0
    np.testing.assert_array_equal(conv2d(Tensor(x), Tensor(k)).data[0], x[1])


@pytest.mark.parametrize("stride", [1, 2])
def test_conv2d_matches_loop(stride, rng):
    x = rng.normal(size=(1, 4, 4))
    k = rng.normal(size=(2, 1, 3, 3))
    np.testing.assert_allclose(conv2d(Tensor(x), Tensor(k), stride=stride).data,
                               conv2d_loop(x, k, stride), rtol=0, atol=1e-13)


def test_conv2d_stride2_odd_rejected():
    with pytest.raises(ShapeError):
        conv2d(Tensor(np.ones((1, 5, 4))), Tensor(np.ones((1, 1, 3, 3))), stride=2)


def test_conv2d_per_sample_kernels(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    k = rng.normal(size=(2, 2, 3, 3, 3))
    out = conv2d(Tensor(x), Tensor(k)).data
    for b in range(2):
        np.testing.assert_allclose(out[b], conv2d_loop(x[b], k[b]), atol=1e-13)


@pytest.mark.parametrize("stride", [1, 2])
def test_conv2d_gradient(stride, rng):
    assert grad_check(lambda x, k, b: sum_(square(conv2d(x, k, stride, bias=b))),
                      rng.uniform(-1, 1, (2, 2, 4, 4)), rng.uniform(-1, 1, (3, 2, 3, 3)),
                      rng.uniform(-1, 1, 3)) <= 1e-4


@pytest.mark.parametrize("stride", [1, 2])
def test_im2col_col2im_adjoint(stride, rng):
    x = rng.normal(size=(2, 3, 4, 6))
    cols = im2col(Tensor(x), stride).data
    y = rng.normal(size=cols.shape)
    lhs = np.sum(cols * y)
    rhs = np.sum(x * col2im(Tensor(y), x.shape, stride).data)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_upsample2x(rng):
    x = rng.normal(size=(2, 3, 3))
    out = upsample2x(Tensor(x)).data
    np.testing.assert_array_equal(out, x.repeat(2, axis=1).repeat(2, axis=2))
    assert grad_check(lambda t: sum_(square(upsample2x(t))), x) <= 1e-4


# -- backprop ---------------------------------------------------------------
def test_backprop_sum_gives_ones(rng):
    x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    with Tape() as tape:
        g = backprop(tape, sum_(x), wrt=[x])[x]
    np.testing.assert_array_equal(g.data, np.ones((3, 2)))


def test_backprop_square_gives_2x(rng):
    x = Tensor(rng.normal(size=4), requires_grad=True)
    with Tape() as tape:
        g = backprop(tape, sum_(mul(x, x)), wrt=[x])[x]
    np.testing.assert_allclose(g.data, 2 * x.data, rtol=1e-15)


def test_backprop_rejects_nonscalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = scale(x, 2.0)
        with pytest.raises(ContractError):
            backprop(tape, y)


def test_unreached_leaf_gets_zero():
    x = Tensor(np.ones(3), requires_grad=True)
    z = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        g = backprop(tape, sum_(x), wrt=[x, z])
    np.testing.assert_array_equal(g[z].data, np.zeros(2))


def test_nothing_recorded_without_tape(rng):
    x = Tensor(rng.normal(size=3), requires_grad=True)
    y = sin(x)
    assert y.is_leaf


def test_no_record_suspends_tape(rng):
    x = Tensor(rng.normal(size=3), requires_grad=True)
    with Tape() as tape:
        with no_record():
            sin(x)
    assert len(tape) == 0


def mlp_params(rng, sizes):
    return [(rng.normal(size=(a, b)) / np.sqrt(a), rng.normal(size=b) * 0.1)
            for a, b in zip(sizes[:-1], sizes[1:])]


def test_composite_mlp_matches_finite_differences(rng):
    layers = mlp_params(rng, [4, 6, 5, 1])
    x = rng.uniform(-1, 1, (3, 4))
    flat = [a for wb in layers for a in wb]

    def fn(x, *p):
        ls = [(p[i], p[i + 1]) for i in range(0, len(p), 2)]
        return sum_(square(mlp(x, ls)))

    assert grad_check(fn, x, *flat) <= 1e-4


def test_gradient_linearity(rng):
    x = Tensor(rng.uniform(-1, 1, 5), requires_grad=True)
    a, b = 0.7, -1.3
    with Tape() as tape:
        l1 = sum_(sin(x) * x)
        l2 = sum_(square(x))
        g = backprop(tape, scale(l1, a) + scale(l2, b), wrt=[x])[x].data
    with Tape() as tape:
        g1 = backprop(tape, sum_(sin(x) * x), wrt=[x])[x].data
    with Tape() as tape:
        g2 = backprop(tape, sum_(square(x)), wrt=[x])[x].data
    np.testing.assert_allclose(g, a * g1 + b * g2, rtol=0, atol=1e-10)


def test_double_backprop_of_gradient_norm(rng):
    # d/dw ||d(sum(w*x^2))/dx||^2 = d/dw sum((2 w x)^2) = 8 w x^2
    x = Tensor(rng.uniform(-1, 1, 4), requires_grad=True)
    w = Tensor(rng.uniform(-1, 1, 4), requires_grad=True)
    with Tape() as tape:
        gx = backprop(tape, sum_(w * x * x), wrt=[x], create_graph=True)[x]
        gw = backprop(tape, sum_(gx * gx), wrt=[w])[w].data
    np.testing.assert_allclose(gw, 8 * w.data * x.data ** 2, rtol=1e-12)


def test_tape_replay_is_deterministic():
    def run():
        g = np.random.default_rng(3)
        layers = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
                  for w, b in mlp_params(g, [3, 8, 1])]
        params = {f"p{i}": t for i, t in enumerate(t for wb in layers for t in wb)}
        st = AdamState()
        x = g.normal(size=(16, 3))
        y = np.sin(x.sum(axis=1, keepdims=True))
        losses = []
        for _ in range(100):
            ps = list(params.values())
            ls = [(ps[i], ps[i + 1]) for i in range(0, len(ps), 2)]
            with Tape() as tape:
                loss = sum_(square(sub(mlp(x, ls), y)))
                grads = backprop(tape, loss, wrt=ps)
            losses.append(loss.item())
            params = adam_step(params, {n: grads[t] for n, t in params.items()}, st)
        return losses

    assert run() == run()


# -- finite differences -----------------------------------------------------
def test_finite_diff_square():
    g = finite_diff_gradient(lambda x: float(x.item() ** 2), np.array(3.0), eps=1e-3)
    assert abs(g.item() - 6.0) <= 1e-6


def test_finite_diff_constant_function():
    assert not finite_diff_gradient(lambda x: 1.0, np.ones(4)).any()


def test_finite_diff_errors():
    with pytest.raises(ConfigError):
        finite_diff_gradient(lambda x: 0.0, np.ones(2), eps=0.0)
    with pytest.raises(NumericsError):
        finite_diff_gradient(lambda x: float("nan"), np.ones(2))


def test_relative_error_scale_free():
    assert relative_error(np.ones(3), np.ones(3)) == 0.0
    assert relative_error(np.array([1.0]), np.array([2.0])) == pytest.approx(0.5)


# -- adam -------------------------------------------------------------------
def test_adam_zero_gradient_keeps_params(rng):
    p = {"x": Tensor(rng.normal(size=3), requires_grad=True)}
    out = adam_step(p, {"x": np.zeros(3)}, AdamState())
    np.testing.assert_array_equal(out["x"].data, p["x"].data)


def test_adam_first_step_is_sign_step(rng):
    x = rng.normal(size=5)
    g = rng.normal(size=5)
    st = AdamState()
    out = adam_step({"x": Tensor(x)}, {"x": g}, st)["x"].data
    np.testing.assert_allclose(out, x - st.lr * np.sign(g), rtol=0, atol=1e-9)
    assert st.step == 1


def test_adam_defaults():
    st = AdamState()
    assert (st.lr, st.beta1, st.beta2, st.eps) == (2e-3, 0.0, 0.99, 1e-8)


def test_adam_converges_on_quadratic():
    # default lr=2e-3 moves each coordinate by at most ~0.4 in 200 steps, so the
    # 200-step target needs a larger step size
    x = Tensor(np.array([0.6, -0.8]), requires_grad=True)
    st = AdamState(lr=2e-2)
    for _ in range(200):
        x = adam_step({"x": x}, {"x": 2 * x.data}, st)["x"]
    assert np.linalg.norm(x.data) <= 1e-3


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step({"x": Tensor(np.ones(3))}, {"x": np.ones(2)}, AdamState())


# -- rng --------------------------------------------------------------------
def test_rng_repeatable():
    np.testing.assert_array_equal(crng.normal(7, "s", 3, 10), crng.normal(7, "s", 3, 10))


def test_rng_streams_and_indices_differ():
    a = crng.normal(7, "s", 3, 10)
    assert not np.array_equal(a, crng.normal(7, "t", 3, 10))
    assert not np.array_equal(a, crng.normal(7, "s", 4, 10))
    assert not np.array_equal(a, crng.normal(8, "s", 3, 10))


def test_rng_normal_moments():
    x = crng.normal(0, "moments", 0, 100_000)
    assert abs(x.mean()) <= 0.02
    assert abs(x.std() - 1.0) <= 0.02


def test_rng_negative_index_direct():
    first = crng.normal(1, "anchor", -5, 4)
    for i in range(0, -5, -1):
        crng.normal(1, "anchor", i, 4)
    np.testing.assert_array_equal(first, crng.normal(1, "anchor", -5, 4))
    assert not np.array_equal(first, crng.normal(1, "anchor", 5, 4))


# -- io ---------------------------------------------------------------------
def test_tensor_file_roundtrip(tmp_path, rng):
    a = rng.normal(size=(2, 3, 4))
    save_tensor(tmp_path / "w", a)
    meta = json.loads((tmp_path / "w.json").read_text())
    assert meta == {"shape": [2, 3, 4], "dtype": "f64"}
    assert (tmp_path / "w.bin").stat().st_size == a.size * 8
    np.testing.assert_array_equal(load_tensor(tmp_path / "w"), a)
    np.testing.assert_array_equal(np.frombuffer((tmp_path / "w.bin").read_bytes(), "<f8"),
                                  a.ravel())


def test_checkpoint_roundtrip_and_errors(tmp_path, rng):
    ts = {"b": rng.normal(size=3), "a": rng.normal(size=(2, 2))}
    save_checkpoint(tmp_path / "ck", ts, {"step": 5})
    manifest = json.loads((tmp_path / "ck" / "manifest.json").read_text())
    assert manifest["names"] == ["b", "a"] and manifest["step"] == 5
    back = load_checkpoint(tmp_path / "ck")
    for k in ts:
        np.testing.assert_array_equal(back[k], ts[k])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing")
    (tmp_path / "ck" / "a.bin").write_bytes(b"\0" * 8)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "ck")


def test_module_load_params_checks_shapes(rng):
    m = Module()
    m.add_param("w", np.zeros((2, 3)))
    m.load_params({"w": np.ones((2, 3))})
    assert m.params["w"].data.sum() == 6
    with pytest.raises(CheckpointError):
        m.load_params({"w": np.ones((3, 2))})
    with pytest.raises(CheckpointError):
        m.load_params({})


def test_linear_layer(rng):
    x, w, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)
    np.testing.assert_allclose(linear(Tensor(x), Tensor(w), Tensor(b)).data, x @ w + b)
