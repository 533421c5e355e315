import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aquanet import ops
from aquanet.errors import ContractViolation, NonFiniteError
from aquanet.gradcheck import grad_check
from aquanet.tensor import Param, Tape, Tensor, backward, record

from oracles import bilinear_point, conv2d_loops


def T(a, dtype=np.float64):
    return Tensor(np.asarray(a, dtype=dtype))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ------------------------------------------------------------------ conv2d

def test_conv_identity_kernel(rng):
    x = T(rng.standard_normal((2, 1, 5, 6)))
    y = ops.conv2d(x, T(np.ones((1, 1, 1, 1))), T([0.0]))
    assert np.array_equal(y.data, x.data)


def test_conv_all_ones_3x3_on_2x2():
    x = T([[[[1, 2], [3, 4]]]])
    y = ops.conv2d(x, T(np.ones((1, 1, 3, 3))), T([0.0]), padding=1)
    expected = conv2d_loops(x.data, np.ones((1, 1, 3, 3)), [0.0], padding=1)
    assert np.array_equal(expected, np.full((1, 1, 2, 2), 10.0))
    assert np.array_equal(y.data, expected)


def test_conv_stride2_shape():
    x = Tensor(np.zeros((1, 3, 128, 128), np.float32))
    w = Tensor(np.zeros((32, 3, 3, 3), np.float32))
    assert ops.conv2d(x, w, None, stride=2, padding=1).shape == (1, 32, 64, 64)


@pytest.mark.parametrize("stride,padding,k", [(1, 0, 1), (1, 1, 3), (2, 1, 3), (2, 2, 5), (3, 0, 3)])
def test_conv_matches_loops(rng, stride, padding, k):
    x = rng.standard_normal((2, 3, 7, 8))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    y = ops.conv2d(T(x), T(w), T(b), stride=stride, padding=padding)
    np.testing.assert_allclose(y.data, conv2d_loops(x, w, b, stride, padding), rtol=1e-12, atol=1e-12)


def test_conv_channel_mismatch():
    with pytest.raises(ContractViolation):
        ops.conv2d(T(np.zeros((1, 2, 4, 4))), T(np.zeros((1, 3, 3, 3))))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 2), c=st.integers(1, 4), h=st.integers(1, 9), w=st.integers(1, 9), seed=st.integers(0, 2**16))
def test_conv_identity_property(n, c, h, w, seed):
    x = np.random.default_rng(seed).standard_normal((n, c, h, w)).astype(np.float32)
    eye = np.eye(c, dtype=np.float32).reshape(c, c, 1, 1)
    y = ops.conv2d(Tensor(x), Tensor(eye), Tensor(np.zeros(c, np.float32)))
    assert np.array_equal(y.data, x)


# --------------------------------------------------- depthwise separable

def test_dws_identity(rng):
    x = T(rng.standard_normal((1, 3, 5, 5)))
    dw = np.zeros((3, 1, 3, 3))
    dw[:, 0, 1, 1] = 1.0
    y = ops.depthwise_separable_conv(x, T(dw), T(np.eye(3).reshape(3, 3, 1, 1)), T(np.zeros(3)))
    assert np.array_equal(y.data, x.data)


def test_dws_matches_composition(rng):
    x = rng.standard_normal((1, 2, 4, 4))
    dw = rng.standard_normal((2, 1, 3, 3))
    pw = rng.standard_normal((3, 2, 1, 1))
    b = rng.standard_normal(3)
    # per-channel conv as independent single-channel convolutions, then 1x1
    per = np.concatenate([conv2d_loops(x[:, c:c + 1], dw[c:c + 1], None, 1, 1) for c in range(2)], axis=1)
    expected = conv2d_loops(per, pw, b)
    y = ops.depthwise_separable_conv(T(x), T(dw), T(pw), T(b))
    np.testing.assert_allclose(y.data, expected, rtol=1e-6)


def test_dws_zero_weights(rng):
    x = T(rng.standard_normal((1, 2, 4, 4)))
    y = ops.depthwise_separable_conv(x, T(np.zeros((2, 1, 3, 3))), T(np.zeros((2, 2, 1, 1))), T(np.zeros(2)))
    assert not y.data.any()


def test_dws_channel_mismatch():
    with pytest.raises(ContractViolation):
        ops.depthwise_separable_conv(T(np.zeros((1, 2, 4, 4))), T(np.zeros((3, 1, 3, 3))),
                                     T(np.zeros((3, 3, 1, 1))), T(np.zeros(3)))


# -------------------------------------------------------------- activations

def test_activation_points():
    assert ops.leaky_relu(T([-1.0])).data[0] == pytest.approx(-0.2)
    assert ops.sigmoid(T([0.0])).data[0] == 0.5
    assert ops.tanh(T([0.0])).data[0] == 0.0


def test_activations_match_math(rng):
    x = rng.standard_normal(200) * 5
    np.testing.assert_allclose(ops.sigmoid(T(x)).data, [1 / (1 + math.exp(-v)) for v in x], rtol=1e-12)
    np.testing.assert_allclose(ops.tanh(T(x)).data, [math.tanh(v) for v in x], rtol=1e-12)
    np.testing.assert_allclose(ops.leaky_relu(T(x)).data, [v if v >= 0 else 0.2 * v for v in x])


def test_sigmoid_extremes_finite():
    y = ops.sigmoid(T([-1e4, 1e4])).data
    assert np.all(np.isfinite(y)) and y[0] == 0.0 and y[1] == 1.0


def test_leaky_slope_range():
    with pytest.raises(ContractViolation):
        ops.leaky_relu(T([1.0]), slope=1.5)


# ---------------------------------------------------------------- resample

def test_nearest_up2():
    y = ops.resample(T([[[[1, 2], [3, 4]]]]), "nearest_up2")
    assert y.data[0, 0].tolist() == [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]


def test_bilinear_same_size_identity(rng):
    x = T(rng.standard_normal((1, 2, 5, 7)))
    assert np.array_equal(ops.resample(x, "bilinear", (5, 7)).data, x.data)


def test_bilinear_ramp_against_hand_oracle():
    ramp = np.array([[0.0, 1.0], [2.0, 3.0]])
    y = ops.resize_bilinear(T(ramp[None, None]), 4, 4).data[0, 0]
    expected = np.array([[bilinear_point(ramp, i, j, 4, 4) for j in range(4)] for i in range(4)])
    np.testing.assert_allclose(y, expected, atol=1e-12)
    # interior of the half-pixel grid: source x = 0.25 -> 0.25
    assert y[0, 1] == pytest.approx(0.25)
    assert y[1, 1] == pytest.approx(0.25 + 2 * 0.25)


def test_bilinear_downscale_oracle(rng):
    img = rng.standard_normal((16, 12))
    y = ops.resize_bilinear(T(img[None, None]), 8, 5).data[0, 0]
    expected = np.array([[bilinear_point(img, i, j, 8, 5) for j in range(5)] for i in range(8)])
    np.testing.assert_allclose(y, expected, atol=1e-12)


def test_resample_zero_target():
    with pytest.raises(ContractViolation):
        ops.resample(T(np.zeros((1, 1, 2, 2))), "bilinear", (0, 3))


# -------------------------------------------------------------- elementwise

def test_elementwise_identities(rng):
    a = T(rng.standard_normal((2, 3, 4, 4)))
    assert np.array_equal(ops.elementwise(a, np.ones(a.shape), "mul").data, a.data)
    assert np.array_equal(ops.elementwise(a, np.zeros(a.shape), "add").data, a.data)


def test_elementwise_channel_broadcast(rng):
    feats = rng.standard_normal((2, 32, 4, 4))
    m = rng.standard_normal((2, 1, 4, 4))
    explicit = feats * np.repeat(m, 32, axis=1)
    assert np.array_equal(ops.elementwise(T(feats), T(m), "mul").data, explicit)


def test_elementwise_bad_shape():
    with pytest.raises(ContractViolation):
        ops.elementwise(T(np.zeros((1, 3, 4, 4))), T(np.zeros((1, 2, 4, 4))), "add")


# ----------------------------------------------------------------- backward

def test_backward_linear():
    x = np.arange(6.0).reshape(1, 1, 2, 3)
    w = Param(np.ones((1, 1, 2, 3)), "w", dtype=np.float64)
    with Tape() as tape:
        loss = ops.sum_all(ops.mul(w, T(x)))
    backward(tape, loss)
    assert np.array_equal(w.grad, x)


def test_backward_sigmoid_at_zero():
    w = Param(np.zeros(1), "w", dtype=np.float64)
    with Tape() as tape:
        loss = ops.sum_all(ops.sigmoid(ops.mul(w, 3.0)))
    backward(tape, loss)
    assert w.grad[0] == pytest.approx(0.25 * 3.0)


def test_backward_accumulates_and_resets():
    w = Param(np.array([2.0]), "w", dtype=np.float64)
    for _ in range(2):
        with Tape() as tape:
            loss = ops.sum_all(ops.square(w))
        backward(tape, loss)
    assert w.grad[0] == pytest.approx(8.0)
    w.zero_grad()
    assert not w.grad.any()


def test_backward_reuse_of_input():
    w = Param(np.array([3.0]), "w", dtype=np.float64)
    with Tape() as tape:
        loss = ops.sum_all(ops.mul(w, w))
    backward(tape, loss)
    assert w.grad[0] == 6.0


def test_backward_non_scalar():
    w = Param(np.ones(3), "w", dtype=np.float64)
    with Tape() as tape:
        y = ops.mul(w, 2.0)
    with pytest.raises(ContractViolation):
        backward(tape, y)


def test_tape_records_in_order():
    w = Param(np.ones(2), "w", dtype=np.float64)
    with Tape() as tape:
        ops.sum_all(ops.tanh(ops.mul(w, 2.0)))
    assert [n.op for n in tape.nodes] == ["mul", "tanh", "sum"]


def test_no_recording_without_tape():
    w = Param(np.ones(2), "w")
    y = ops.mul(w, 2.0)
    assert not y.requires_grad


# --------------------------------------------------------------- grad_check

def test_grad_check_quadratic(rng):
    a = rng.standard_normal((4, 4))
    a = a @ a.T
    x = Param(rng.standard_normal((4, 1)), "x", dtype=np.float64)
    w = Tensor(a.reshape(4, 4, 1, 1))

    def quad():
        # 0.5 * x^T A x, with A x as a 1x1 convolution over a (1, 4, 1, 1) image
        col = record("reshape", x.data.reshape(1, -1, 1, 1), (x,), lambda g: (g.reshape(x.shape),))
        return ops.sum_all(ops.mul(ops.mul(col, ops.conv2d(col, w)), 0.5))

    assert grad_check(quad, [x], eps=1e-5) < 1e-9
    np.testing.assert_allclose(x.grad, a @ x.data, rtol=1e-10)


def test_grad_check_conv_chain(rng):
    x = Tensor(rng.standard_normal((2, 3, 6, 6)))
    w = Param(rng.standard_normal((4, 3, 3, 3)) * 0.3, "w", dtype=np.float64)
    b = Param(rng.standard_normal(4) * 0.1, "b", dtype=np.float64)
    w2 = Param(rng.standard_normal((2, 4, 3, 3)) * 0.3, "w2", dtype=np.float64)
    r = Tensor(rng.standard_normal((2, 2, 3, 3)))

    def f():
        h = ops.leaky_relu(ops.conv2d(x, w, b, padding=1))
        return ops.sum_all(ops.mul(ops.conv2d(h, w2, None, stride=2, padding=1), r))

    assert grad_check(f, [w, b, w2], max_coords=20) < 1e-6


def test_grad_check_constant():
    w = Param(np.ones(3), "w", dtype=np.float64)
    assert grad_check(lambda: ops.sum_all(Tensor(np.ones(3))), [w]) == 0.0
    assert not w.grad.any()


def test_grad_check_names_nonfinite_op():
    w = Param(np.array([-1.0, 4.0]), "w", dtype=np.float64)
    with pytest.raises(NonFiniteError, match="sqrt"), np.errstate(invalid="ignore"):
        grad_check(lambda: ops.sum_all(ops.sqrt(w)), [w])


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_grad_arithmetic_broadcast(rng, op):
    a = Param(rng.uniform(1, 2, (2, 3, 4, 4)), "a", dtype=np.float64)
    b = Param(rng.uniform(1, 2, (2, 1, 4, 4)), "b", dtype=np.float64)
    fn = getattr(ops, op)
    r = Tensor(rng.standard_normal((2, 3, 4, 4)))
    assert grad_check(lambda: ops.sum_all(ops.mul(fn(a, b), r)), [a, b], max_coords=10) < 1e-6


def test_grad_resample_and_select(rng):
    x = Param(rng.standard_normal((1, 2, 4, 6)), "x", dtype=np.float64)
    r1 = Tensor(rng.standard_normal((1, 2, 8, 12)))
    r2 = Tensor(rng.standard_normal((1, 2, 3, 5)))
    r3 = Tensor(rng.standard_normal((1, 1, 4, 6)))

    def f():
        a = ops.sum_all(ops.mul(ops.upsample_nearest2(x), r1))
        b = ops.sum_all(ops.mul(ops.resize_bilinear(x, 3, 5), r2))
        c = ops.sum_all(ops.mul(ops.select_channels(x, 1, 2), r3))
        d = ops.sum_all(ops.mul(ops.reflect_frequency(x), r1.data[:, :, :4, :6]))
        return ops.add(ops.add(a, b), ops.add(c, d))

    assert grad_check(f, [x], max_coords=48) < 1e-6


def test_grad_depthwise_stride(rng):
    x = Param(rng.standard_normal((1, 3, 7, 7)), "x", dtype=np.float64)
    w = Param(rng.standard_normal((3, 1, 3, 3)), "w", dtype=np.float64)
    r = Tensor(rng.standard_normal((1, 3, 4, 4)))
    assert grad_check(lambda: ops.sum_all(ops.mul(ops.depthwise_conv2d(x, w, stride=2), r)),
                      [x, w], max_coords=30) < 1e-6


def test_primitives_are_deterministic(rng):
    x = rng.standard_normal((2, 8, 16, 16)).astype(np.float32)
    w = rng.standard_normal((16, 8, 3, 3)).astype(np.float32)
    a = ops.conv2d(Tensor(x), Tensor(w), None, padding=1).data
    b = ops.conv2d(Tensor(x), Tensor(w), None, padding=1).data
    assert a.tobytes() == b.tobytes()
