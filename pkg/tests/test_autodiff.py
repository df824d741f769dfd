"""Oracle tests for the autodiff engine.

Convolutions are checked against direct nested-loop references, the
conv/transposed-conv pair against the adjoint identity
<L x, y> == <x, L^T y>, and every backward pass against central finite
differences.
"""

import numpy as np
import pytest

from notchkit.autodiff import (OptimizerState, Tensor, adam_step, avg_pool2d,
                               concat_channels, conv2d, conv2d_transpose,
                               cross_entropy, filter_with_kernels,
                               global_avg_pool, gradient_check, l1_loss,
                               linear, relu, sigmoid, softmax_channels,
                               upsample_bilinear, upsample_nearest)
from notchkit.autodiff.tensor import set_debug_checks
from notchkit.errors import DimensionError, NumericError


@pytest.fixture(autouse=True)
def _debug_checks():
    set_debug_checks(True)
    yield
    set_debug_checks(False)


def _rand(rng, *shape):
    return rng.standard_normal(shape).astype(np.float32)


# ---------------------------------------------------------------------------
# nested-loop convolution references
# ---------------------------------------------------------------------------

def conv2d_reference(x, w, stride, padding):
    n, c, h, ww = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (ww + 2 * padding - k) // stride + 1
    out = np.zeros((n, o, ho, wo), np.float64)
    for ni in range(n):
        for oi in range(o):
            for p in range(ho):
                for q in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for a in range(k):
                            for b in range(k):
                                acc += xp[ni, ci, p * stride + a, q * stride + b] * w[oi, ci, a, b]
                    out[ni, oi, p, q] = acc
    return out


def conv2d_transpose_reference(x, w, stride):
    n, c, h, ww = x.shape
    _, o, k, _ = w.shape
    ht, wt = (h - 1) * stride + k, (ww - 1) * stride + k
    out = np.zeros((n, o, ht, wt), np.float64)
    for ni in range(n):
        for ci in range(c):
            for p in range(h):
                for q in range(ww):
                    for oi in range(o):
                        for a in range(k):
                            for b in range(k):
                                out[ni, oi, p * stride + a, q * stride + b] += \
                                    x[ni, ci, p, q] * w[ci, oi, a, b]
    return out


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_conv2d_matches_nested_loops(stride, padding):
    rng = np.random.default_rng(11)
    x = _rand(rng, 2, 3, 7, 6)
    w = _rand(rng, 4, 3, 3, 3)
    got = conv2d(Tensor(x), Tensor(w), stride=stride, padding=padding).data
    want = conv2d_reference(x, w, stride, padding)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) < 1e-5


@pytest.mark.parametrize("stride", [1, 2, 3])
def test_conv2d_transpose_matches_nested_loops(stride):
    rng = np.random.default_rng(12)
    x = _rand(rng, 2, 3, 5, 4)
    w = _rand(rng, 3, 2, 3, 3)
    got = conv2d_transpose(Tensor(x), Tensor(w), stride=stride).data
    want = conv2d_transpose_reference(x, w, stride)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) < 1e-5


def test_conv2d_transpose_ones_overlap_pattern():
    # 2x2 ones through a 3x3 ones kernel at stride 2: overlap counting gives
    # the outer product of [1, 1, 2, 1, 1] with itself (centre cell sits under
    # four kernel placements).
    x = Tensor(np.ones((1, 1, 2, 2), np.float32))
    w = Tensor(np.ones((1, 1, 3, 3), np.float32))
    out = conv2d_transpose(x, w, stride=2).data[0, 0]
    row = np.array([1.0, 1.0, 2.0, 1.0, 1.0])
    assert out.shape == (5, 5)
    np.testing.assert_allclose(out, np.outer(row, row), atol=0)


def test_conv_pair_is_adjoint():
    # <conv(x), y> == <x, conv_t(y)> with the shared weight.
    rng = np.random.default_rng(13)
    for stride, side in ((1, 8), (2, 9)):  # sides chosen so every input row is read
        x = _rand(rng, 2, 3, side, side)
        w = _rand(rng, 5, 3, 3, 3)
        y_shape = conv2d(Tensor(x), Tensor(w), stride=stride).data.shape
        y = _rand(rng, *y_shape)
        lhs = float(np.vdot(conv2d(Tensor(x), Tensor(w), stride=stride).data, y))
        rhs = float(np.vdot(x, conv2d_transpose(Tensor(y), Tensor(w), stride=stride).data))
        assert abs(lhs - rhs) / max(1.0, abs(lhs)) < 1e-4


def test_upsample_bilinear_adjoint_via_backward():
    rng = np.random.default_rng(14)
    x = Tensor(_rand(rng, 1, 2, 6, 6), requires_grad=True)
    y = upsample_bilinear(x, 2)
    g = _rand(rng, *y.data.shape)
    y.backward(g)
    lhs = float(np.vdot(y.data, g))
    rhs = float(np.vdot(x.data, x.grad))
    assert abs(lhs - rhs) / max(1.0, abs(lhs)) < 1e-4


def test_channel_mismatch_raises():
    x = Tensor(np.zeros((1, 3, 8, 8), np.float32))
    w = Tensor(np.zeros((4, 2, 3, 3), np.float32))
    with pytest.raises(DimensionError):
        conv2d(x, w)
    with pytest.raises(DimensionError):
        conv2d_transpose(x, w)


# ---------------------------------------------------------------------------
# gradient checks against central differences
# ---------------------------------------------------------------------------

def test_gradient_check_conv2d():
    rng = np.random.default_rng(21)
    x = Tensor(_rand(rng, 1, 2, 6, 6), requires_grad=True)
    w = Tensor(_rand(rng, 3, 2, 3, 3), requires_grad=True)
    b = Tensor(_rand(rng, 3), requires_grad=True)
    err = gradient_check(lambda a, ww, bb: conv2d(a, ww, bb, stride=2, padding=1).sum(),
                         [x, w, b])
    assert err < 1e-3


def test_gradient_check_conv2d_transpose():
    rng = np.random.default_rng(22)
    x = Tensor(_rand(rng, 1, 2, 4, 4), requires_grad=True)
    w = Tensor(_rand(rng, 2, 3, 3, 3), requires_grad=True)
    err = gradient_check(lambda a, ww: conv2d_transpose(a, ww, stride=2).sum(), [x, w])
    assert err < 1e-3


def test_gradient_check_relu_away_from_kink():
    rng = np.random.default_rng(23)
    x = rng.standard_normal((4, 5)).astype(np.float32)
    x[np.abs(x) < 0.2] = 0.5  # keep clear of the non-differentiable point
    t = Tensor(x, requires_grad=True)
    err = gradient_check(lambda a: (relu(a) * relu(a)).sum(), [t])
    assert err < 1e-4


def test_gradient_check_sigmoid_softmax():
    rng = np.random.default_rng(24)
    t = Tensor(_rand(rng, 3, 4), requires_grad=True)
    assert gradient_check(lambda a: (sigmoid(a) * sigmoid(a)).sum(), [t]) < 1e-3
    t2 = Tensor(_rand(rng, 2, 5), requires_grad=True)
    w = _rand(rng, 2, 5)
    assert gradient_check(lambda a: (softmax_channels(a, axis=1) * Tensor(w)).sum(),
                          [t2]) < 1e-3


def test_gradient_check_pool_upsample_linear():
    rng = np.random.default_rng(25)
    x = Tensor(_rand(rng, 1, 2, 4, 4), requires_grad=True)
    assert gradient_check(lambda a: (avg_pool2d(a, 2) * avg_pool2d(a, 2)).sum(), [x]) < 1e-3
    x2 = Tensor(_rand(rng, 1, 1, 3, 3), requires_grad=True)
    assert gradient_check(lambda a: (upsample_nearest(a, 2) * upsample_nearest(a, 2)).sum(),
                          [x2]) < 1e-3
    x3 = Tensor(_rand(rng, 1, 1, 4, 4), requires_grad=True)
    m = _rand(rng, 1, 1, 8, 8)
    assert gradient_check(lambda a: (upsample_bilinear(a, 2) * Tensor(m)).sum(), [x3]) < 1e-3
    xl = Tensor(_rand(rng, 3, 4), requires_grad=True)
    wl = Tensor(_rand(rng, 4, 2), requires_grad=True)
    bl = Tensor(_rand(rng, 2), requires_grad=True)
    assert gradient_check(lambda a, ww, bb: (linear(a, ww, bb) * linear(a, ww, bb)).sum(),
                          [xl, wl, bl]) < 1e-3


def test_gradient_check_global_avg_pool_concat():
    rng = np.random.default_rng(26)
    a = Tensor(_rand(rng, 2, 3, 4, 4), requires_grad=True)
    b = Tensor(_rand(rng, 2, 2, 4, 4), requires_grad=True)

    def fn(aa, bb):
        cat = concat_channels([aa, bb])
        return (global_avg_pool(cat) * global_avg_pool(cat)).sum()

    assert gradient_check(fn, [a, b]) < 1e-3


def test_gradient_check_losses():
    rng = np.random.default_rng(27)
    pred = Tensor(_rand(rng, 2, 3, 4, 4), requires_grad=True)
    target = Tensor(pred.data + np.float32(0.5) + _rand(rng, 2, 3, 4, 4) * 0.01)
    assert gradient_check(lambda p: l1_loss(p, target), [pred]) < 1e-3
    logits = Tensor(_rand(rng, 4, 2), requires_grad=True)
    labels = np.array([0, 1, 1, 0])
    assert gradient_check(lambda z: cross_entropy(z, labels), [logits]) < 1e-3


def test_gradient_check_pixelwise_filter():
    rng = np.random.default_rng(28)
    x = Tensor(rng.uniform(0, 1, (1, 2, 5, 5)).astype(np.float32), requires_grad=True)
    raw = Tensor(_rand(rng, 1, 9, 5, 5), requires_grad=True)
    mix = _rand(rng, 1, 2, 5, 5)

    def fn(a, r):
        kf = softmax_channels(r, axis=1)
        return (filter_with_kernels(a, kf) * Tensor(mix)).sum()

    assert gradient_check(fn, [x, raw]) < 1e-3


# ---------------------------------------------------------------------------
# exact/functional properties
# ---------------------------------------------------------------------------

def test_l1_subgradient_is_unit_over_n():
    rng = np.random.default_rng(31)
    a = rng.uniform(0, 1, (5, 5)).astype(np.float32)
    d = np.where(rng.uniform(size=(5, 5)) < 0.5, 0.05, -0.05).astype(np.float32)
    pred = Tensor(a + d, requires_grad=True)
    loss = l1_loss(pred, Tensor(a))
    loss.backward()
    want = np.sign(d) * np.float32(1.0 / d.size)
    np.testing.assert_array_equal(pred.grad, want)


def test_pixelwise_filter_brute_force_and_convexity():
    rng = np.random.default_rng(32)
    x = rng.uniform(0, 1, (1, 3, 6, 6)).astype(np.float32)
    raw = rng.standard_normal((1, 9, 6, 6)).astype(np.float32)
    kf = np.exp(raw) / np.exp(raw).sum(axis=1, keepdims=True)
    got = filter_with_kernels(Tensor(x), Tensor(kf.astype(np.float32))).data

    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    want = np.zeros_like(x)
    for c in range(3):
        for h in range(6):
            for w in range(6):
                acc = 0.0
                for idx in range(9):
                    a, b = divmod(idx, 3)
                    acc += xp[0, c, h + a, w + b] * kf[0, idx, h, w]
                want[0, c, h, w] = acc
    assert np.max(np.abs(got - want)) < 1e-5
    # convex combination of unit-interval inputs stays in the unit interval
    assert got.min() >= 0.0 and got.max() <= 1.0 + 1e-6


def test_pixelwise_filter_linear_in_image_for_fixed_kernels():
    rng = np.random.default_rng(33)
    kf_raw = rng.standard_normal((1, 9, 8, 8)).astype(np.float32)
    kf = Tensor(np.exp(kf_raw) / np.exp(kf_raw).sum(axis=1, keepdims=True))
    a = rng.uniform(0, 0.5, (1, 3, 8, 8)).astype(np.float32)
    b = rng.uniform(0, 0.5, (1, 3, 8, 8)).astype(np.float32)
    fa = filter_with_kernels(Tensor(a), kf).data
    fb = filter_with_kernels(Tensor(b), kf).data
    fab = filter_with_kernels(Tensor(a + b), kf).data
    assert np.max(np.abs(fab - (fa + fb))) < 1e-5


def test_identity_kernel_field_is_identity():
    rng = np.random.default_rng(34)
    x = rng.uniform(0, 1, (2, 3, 8, 8)).astype(np.float32)
    kf = np.zeros((2, 9, 8, 8), np.float32)
    kf[:, 4] = 1.0  # centre tap of the 3x3 window
    out = filter_with_kernels(Tensor(x), Tensor(kf)).data
    np.testing.assert_array_equal(out, x)


def test_softmax_channels_sums_to_one():
    rng = np.random.default_rng(35)
    x = Tensor(rng.standard_normal((2, 9, 4, 4)).astype(np.float32) * 20)
    s = softmax_channels(x, axis=1).data
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-5)
    assert s.min() >= 0.0


def test_avg_pool_then_nearest_upsample_preserves_means():
    rng = np.random.default_rng(36)
    x = rng.uniform(0, 1, (1, 1, 8, 8)).astype(np.float32)
    down = avg_pool2d(Tensor(x), 2)
    up = upsample_nearest(down, 2)
    assert abs(float(up.data.mean()) - float(x.mean())) < 1e-6


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params():
    p = Tensor(np.array([1.0, -2.0], np.float32), requires_grad=True)
    p.grad = np.zeros(2, np.float32)
    state = OptimizerState(lr=0.05)
    adam_step({"p": p}, state)
    np.testing.assert_array_equal(p.data, np.array([1.0, -2.0], np.float32))
    assert state.step == 1


def test_adam_first_step_magnitude_near_lr():
    # With zero state and a constant gradient, bias correction makes the
    # first update ~= lr * sign(g).
    p = Tensor(np.array([0.0, 0.0, 0.0], np.float32), requires_grad=True)
    p.grad = np.array([3.0, -0.5, 1e-3], np.float32)
    state = OptimizerState(lr=0.01)
    adam_step({"p": p}, state)
    np.testing.assert_allclose(np.abs(p.data), 0.01, rtol=1e-3)
    assert np.sign(p.data[0]) == -1 and np.sign(p.data[1]) == 1


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(7)
        p = Tensor(rng.standard_normal(4).astype(np.float32), requires_grad=True)
        state = OptimizerState(lr=0.02)
        for _ in range(5):
            p.grad = (p.data * 2).astype(np.float32)
            adam_step({"p": p}, state)
        return p.data.copy()

    np.testing.assert_array_equal(run(), run())


def test_adam_converges_on_quadratic():
    p = Tensor(np.array([4.0], np.float32), requires_grad=True)
    state = OptimizerState(lr=0.1)
    for _ in range(300):
        p.grad = (2 * p.data).astype(np.float32)
        adam_step({"p": p}, state)
    assert abs(float(p.data[0])) < 1e-2


def test_adam_rejects_nonfinite_gradient():
    p = Tensor(np.zeros(2, np.float32), requires_grad=True)
    p.grad = np.array([np.nan, 0.0], np.float32)
    with pytest.raises(NumericError):
        adam_step({"p": p}, OptimizerState())


# ---------------------------------------------------------------------------
# graph mechanics
# ---------------------------------------------------------------------------

def test_gradient_accumulates_over_reuse():
    x = Tensor(np.array([2.0], np.float32), requires_grad=True)
    y = x * 3.0 + x * 5.0
    y.backward()
    np.testing.assert_allclose(x.grad, [8.0])


def test_backward_needs_scalar():
    x = Tensor(np.ones((2, 2), np.float32), requires_grad=True)
    with pytest.raises(NumericError):
        (x * 2.0).backward()


def test_debug_checks_catch_nan():
    with pytest.raises(NumericError):
        Tensor(np.array([np.nan], np.float32)) * 1.0
