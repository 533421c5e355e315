"""Differentiable primitives: arithmetic, activations, convolutions, resampling.

Every function takes and returns :class:`~aquanet.tensor.Tensor` and records a
backward closure on the active tape. Image tensors are laid out NCHW.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractViolation
from .tensor import Tensor, as_tensor, record

LEAKY_SLOPE = 0.2


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# --------------------------------------------------------------- arithmetic

def add(a, b):
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return record("add", a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return record("sub", a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = _pair(a, b)
    ad, bd = a.data, b.data
    return record("mul", ad * bd, (a, b),
                  lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b):
    a, b = _pair(a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def bw(g):
        ga = g / bd
        return _unbroadcast(ga, ad.shape), _unbroadcast(-ga * out, bd.shape)

    return record("div", out, (a, b), bw)


def sqrt(x):
    out = np.sqrt(x.data)
    return record("sqrt", out, (x,), lambda g: (g * 0.5 / out,))


def square(x):
    d = x.data
    return record("square", d * d, (x,), lambda g: (2.0 * g * d,))


def absolute(x):
    d = x.data
    return record("abs", np.abs(d), (x,), lambda g: (g * np.sign(d),))


def sum_all(x):
    shape = x.shape
    out = np.sum(x.data, dtype=x.dtype)
    return record("sum", np.asarray(out), (x,),
                  lambda g: (np.broadcast_to(g, shape).astype(x.dtype),))


def mean(x, axis=None, keepdims=False):
    """Mean over ``axis`` (all elements when None)."""
    shape = x.shape
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size // max(np.asarray(out).size, 1)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).astype(x.dtype),)

    return record("mean", np.asarray(out, dtype=x.dtype), (x,), bw)


def elementwise(a, b, op):
    """``a (op) b`` for op in {"add", "mul"}.

    ``b`` must match ``a`` exactly, or be single-channel with the same
    batch/height/width, in which case it is replicated over a's channels.
    """
    if op not in ("add", "mul"):
        raise ContractViolation(f"unknown elementwise op {op!r}")
    a, b = _pair(a, b)
    if a.shape != b.shape:
        ok = (a.ndim == 4 and b.ndim == 4 and b.shape[1] == 1
              and (b.shape[0], b.shape[2], b.shape[3]) == (a.shape[0], a.shape[2], a.shape[3]))
        if not ok:
            raise ContractViolation(f"cannot combine shapes {a.shape} and {b.shape}")
    return add(a, b) if op == "add" else mul(a, b)


# -------------------------------------------------------------- activations

def leaky_relu(x, slope=LEAKY_SLOPE):
    if not 0.0 < slope < 1.0:
        raise ContractViolation(f"leaky_relu slope must lie in (0, 1), got {slope}")
    d = x.data
    pos = d >= 0
    out = np.where(pos, d, d * slope)
    return record("leaky_relu", out, (x,), lambda g: (np.where(pos, g, g * slope),))


def sigmoid(x):
    d = x.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype)
    return record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(x.data)
    return record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def activation(x, kind, slope=LEAKY_SLOPE):
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ContractViolation(f"unknown activation {kind!r}")


# ------------------------------------------------------------- convolutions

def conv_output_size(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def _pad(d, p):
    if p == 0:
        return d
    return np.pad(d, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """Zero-padded 2-D cross-correlation (no kernel flip).

    ``weight`` is (c_out, c_in, k, k) and ``bias`` is (c_out,) or None.
    """
    co, ci, k, k2 = weight.shape
    if x.ndim != 4 or x.shape[1] != ci:
        raise ContractViolation(f"conv2d: input {x.shape} does not match weight {weight.shape}")
    if k != k2 or k % 2 == 0:
        raise ContractViolation(f"conv2d: kernel must be square and odd, got {k}x{k2}")
    if stride < 1 or padding < 0:
        raise ContractViolation(f"conv2d: bad stride={stride} / padding={padding}")
    n, _, h, w = x.shape
    ho, wo = conv_output_size(h, k, stride, padding), conv_output_size(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ContractViolation(f"conv2d: input {h}x{w} too small for kernel {k}")
    xp = _pad(x.data, padding)
    cols = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    wd = weight.data
    out = np.tensordot(cols, wd, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, co, 1, 1)
    out = np.ascontiguousarray(out)

    def bw(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        gcols = np.tensordot(g, wd, axes=([1], [0]))  # n, ho, wo, ci, k, k
        gxp = np.zeros_like(xp)
        span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + span_h:stride, j:j + span_w:stride] += gcols[..., i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return record("conv2d", out, inputs, bw if bias is not None else (lambda g: bw(g)[:2]))


def depthwise_conv2d(x, weight, stride=1, padding=None):
    """Per-channel spatial convolution; ``weight`` is (c, 1, k, k).

    Padding defaults to ``k // 2`` (same-size output at stride 1).
    """
    c, one, k, _ = weight.shape
    if x.ndim != 4 or x.shape[1] != c or one != 1:
        raise ContractViolation(f"depthwise_conv2d: input {x.shape} does not match weight {weight.shape}")
    if k % 2 == 0:
        raise ContractViolation("depthwise_conv2d: kernel size must be odd")
    padding = k // 2 if padding is None else padding
    n, _, h, w = x.shape
    ho, wo = conv_output_size(h, k, stride, padding), conv_output_size(w, k, stride, padding)
    xp = _pad(x.data, padding)
    wd = weight.data
    span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1
    out = np.zeros((n, c, ho, wo), dtype=np.result_type(xp, wd))
    for i in range(k):
        for j in range(k):
            out += wd[:, 0, i, j].reshape(1, c, 1, 1) * xp[:, :, i:i + span_h:stride, j:j + span_w:stride]

    def bw(g):
        gw = np.zeros_like(wd)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                patch = xp[:, :, i:i + span_h:stride, j:j + span_w:stride]
                gw[:, 0, i, j] = (g * patch).sum(axis=(0, 2, 3))
                gxp[:, :, i:i + span_h:stride, j:j + span_w:stride] += g * wd[:, 0, i, j].reshape(1, c, 1, 1)
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return gx, gw

    return record("depthwise_conv2d", out, (x, weight), bw)


def depthwise_separable_conv(x, dw_weight, pw_weight, bias=None):
    """Depthwise k x k convolution followed by a 1 x 1 pointwise convolution."""
    if dw_weight.shape[0] != x.shape[1]:
        raise ContractViolation(
            f"depthwise weight has {dw_weight.shape[0]} channels, input has {x.shape[1]}")
    if pw_weight.shape[1] != dw_weight.shape[0] or pw_weight.shape[2:] != (1, 1):
        raise ContractViolation(f"pointwise weight {pw_weight.shape} incompatible with depthwise {dw_weight.shape}")
    return conv2d(depthwise_conv2d(x, dw_weight), pw_weight, bias)


# --------------------------------------------------------------- resampling

def upsample_nearest2(x):
    d = x.data
    out = d.repeat(2, axis=2).repeat(2, axis=3)
    n, c, h, w = d.shape
    return record("upsample_nearest2", out, (x,),
                  lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),))


def bilinear_matrix(n_in, n_out, dtype=np.float64):
    """(n_out, n_in) interpolation matrix, half-pixel centres, edge-clamped."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for o in range(n_out):
        src = max((o + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[o, i0] += 1.0 - lam
        m[o, i1] += lam
    return m.astype(dtype)


def resize_bilinear(x, h, w):
    if h < 1 or w < 1:
        raise ContractViolation(f"resize target must be at least 1x1, got {h}x{w}")
    if x.shape[2:] == (h, w):
        return x
    ah = bilinear_matrix(x.shape[2], h, x.dtype)
    aw = bilinear_matrix(x.shape[3], w, x.dtype)
    out = ah @ x.data @ aw.T
    return record("resize_bilinear", out, (x,), lambda g: (ah.T @ g @ aw,))


def resample(x, mode, size=None):
    if mode == "nearest_up2":
        return upsample_nearest2(x)
    if mode == "bilinear":
        if size is None:
            raise ContractViolation("bilinear resample needs a target size")
        return resize_bilinear(x, *size)
    raise ContractViolation(f"unknown resample mode {mode!r}")


def reflect_frequency(x):
    """Gather ``x[..., -u mod H, -v mod W]``; an involution on the DFT grid."""
    h, w = x.shape[-2:]
    iu = (-np.arange(h)) % h
    iv = (-np.arange(w)) % w

    def flip(d):
        return d[..., iu, :][..., iv]

    return record("reflect_frequency", flip(x.data), (x,), lambda g: (flip(g),))


def select_channels(x, start, stop):
    d = x.data

    def bw(g):
        full = np.zeros_like(d)
        full[:, start:stop] = g
        return (full,)

    return record("select_channels", d[:, start:stop], (x,), bw)
