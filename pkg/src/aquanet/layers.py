"""Parameter containers shared by the network blocks, plus initialisation."""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ops
from .tensor import Param


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Counter-based (Philox) stream keyed by (seed, parameter name).

    Keying by name keeps every array's draw independent of construction order.
    """
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return np.random.Generator(np.random.Philox(ss))


def uniform_weight(shape, fan_in, seed, name, dtype):
    bound = np.sqrt(1.0 / fan_in)
    w = named_rng(seed, name).uniform(-bound, bound, size=shape)
    return Param(w.astype(dtype), name)


@dataclass
class Conv:
    """A k x k convolution with optional bias."""

    weight: Param
    bias: Optional[Param] = None
    stride: int = 1

    @classmethod
    def init(cls, name, c_in, c_out, k, seed, dtype, stride=1, bias=True):
        w = uniform_weight((c_out, c_in, k, k), c_in * k * k, seed, name + ".weight", dtype)
        b = Param(np.zeros(c_out, dtype=dtype), name + ".bias") if bias else None
        return cls(w, b, stride)

    def __call__(self, x):
        k = self.weight.shape[-1]
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=k // 2)

    def params(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


@dataclass
class DWSConv:
    """Depthwise k x k (no bias) followed by a biased pointwise 1 x 1."""

    dw: Param
    pw: Param
    bias: Param

    @classmethod
    def init(cls, name, c, seed, dtype, k=3):
        dw = uniform_weight((c, 1, k, k), k * k, seed, name + ".dw", dtype)
        pw = uniform_weight((c, c, 1, 1), c, seed, name + ".pw", dtype)
        return cls(dw, pw, Param(np.zeros(c, dtype=dtype), name + ".bias"))

    def __call__(self, x):
        return ops.depthwise_separable_conv(x, self.dw, self.pw, self.bias)

    def params(self):
        return [self.dw, self.pw, self.bias]
