"""Illumination branch: per-pixel scale/stretch coefficients and the map they define."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .layers import Conv
from .tensor import Tensor, record

HIDDEN = 16


@dataclass
class IlluminationParams:
    conv1: Conv
    conv2: Conv
    conv3: Conv

    @classmethod
    def init(cls, seed, dtype, prefix="illum"):
        return cls(
            Conv.init(f"{prefix}.conv1", 3, HIDDEN, 3, seed, dtype),
            Conv.init(f"{prefix}.conv2", HIDDEN, HIDDEN, 3, seed, dtype),
            Conv.init(f"{prefix}.conv3", HIDDEN, 2, 3, seed, dtype),
        )

    def params(self):
        return [*self.conv1.params(), *self.conv2.params(), *self.conv3.params()]


def predict_coefficients(image: Tensor, params: IlluminationParams):
    """Raw (unbounded) scale and stretch maps, each (n, 1, h, w)."""
    h = ops.leaky_relu(params.conv1(image))
    h = ops.leaky_relu(params.conv2(h))
    both = params.conv3(h)
    return ops.select_channels(both, 0, 1), ops.select_channels(both, 1, 2)


def illumination_map(alpha_map: Tensor, beta_map: Tensor) -> Tensor:
    """``sigmoid(alpha) * (1 + tanh(beta))``, valued in (0, 2).

    Evaluated as ``2 sigmoid(alpha) sigmoid(2 beta)``, which is the same
    function without the cancellation in ``1 + tanh`` for negative beta.
    Values that still saturate in floating point are nudged to the nearest
    representable interior point; the gradient passes through unchanged.
    """
    two_beta = ops.mul(beta_map, 2.0)
    L = ops.mul(ops.mul(ops.sigmoid(alpha_map), ops.sigmoid(two_beta)), 2.0)
    return _open_interval(L, 0.0, 2.0)


def _open_interval(x: Tensor, lo, hi) -> Tensor:
    d = x.data
    t = d.dtype.type
    floor = t(lo) + np.finfo(d.dtype).tiny  # a normal number, so resampling cannot underflow it
    ceil = np.nextafter(t(hi), t(lo))
    if d.size == 0 or (d.min() >= floor and d.max() <= ceil):
        return x
    return record("open_interval", np.clip(d, floor, ceil), (x,), lambda g: (g,))


def rescale_illumination(L: Tensor, h: int, w: int) -> Tensor:
    return _open_interval(ops.resize_bilinear(L, h, w), 0.0, 2.0)
