"""Residual encoder-decoder backbone and full network assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import ops
from .errors import ContractViolation
from .illumination import IlluminationParams, illumination_map, predict_coefficients, rescale_illumination
from .layers import Conv, DWSConv
from .spectral import FrequencyBlockParams, frequency_correction, fuse_input
from .tensor import Param, Tensor

STAGES = 3
# 0.329M parameters with the fixed down/up-sampling design; see README.
DEFAULT_BASE_CHANNELS = 19

ABLATIONS = {
    "base": (False, False),
    "base+freq": (True, False),
    "base+illum": (False, True),
    "full": (True, True),
}


@dataclass(frozen=True)
class AquaNetConfig:
    base_channels: int = DEFAULT_BASE_CHANNELS
    stages: int = STAGES
    input_size: int = 128
    enable_frequency: bool = True
    enable_illumination: bool = True
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.stages != STAGES:
            raise ContractViolation(f"only {STAGES} stages are supported")
        if self.base_channels < 1:
            raise ContractViolation("base_channels must be positive")

    @classmethod
    def for_ablation(cls, name, **kw):
        try:
            freq, illum = ABLATIONS[name]
        except KeyError:
            raise ContractViolation(f"unknown ablation {name!r}; expected one of {sorted(ABLATIONS)}")
        return cls(enable_frequency=freq, enable_illumination=illum, **kw)

    @property
    def ablation(self):
        for name, flags in ABLATIONS.items():
            if flags == (self.enable_frequency, self.enable_illumination):
                return name

    def width(self, stage):
        return self.base_channels * 2 ** stage


@dataclass
class REMParams:
    dws1: DWSConv
    dws2: DWSConv
    pw: Conv

    @classmethod
    def init(cls, name, c, seed, dtype):
        pw = Conv(Param(np.eye(c, dtype=dtype).reshape(c, c, 1, 1), name + ".pw.weight"),
                  Param(np.zeros(c, dtype=dtype), name + ".pw.bias"))
        return cls(DWSConv.init(name + ".dws1", c, seed, dtype),
                   DWSConv.init(name + ".dws2", c, seed, dtype), pw)

    @property
    def width(self):
        return self.pw.weight.shape[0]

    def params(self):
        return [*self.dws1.params(), *self.dws2.params(), *self.pw.params()]


@dataclass
class AquaNetParams:
    stem: Conv
    enc_rems: List[REMParams]
    downs: List[Conv]
    ups: List[Conv]
    dec_rems: List[REMParams]
    head: Conv
    freq: Optional[FrequencyBlockParams] = None
    illum: Optional[IlluminationParams] = None

    def params(self):
        out = list(self.stem.params())
        if self.freq is not None:
            out += self.freq.params()
        if self.illum is not None:
            out += self.illum.params()
        for rem, down in zip(self.enc_rems, self.downs):
            out += rem.params() + down.params()
        for up, rem in zip(self.ups, self.dec_rems):
            out += up.params() + rem.params()
        return out + self.head.params()

    def named(self):
        return {p.name: p for p in self.params()}

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()


def rem_forward(x: Tensor, p: REMParams, slope=ops.LEAKY_SLOPE) -> Tensor:
    """Two residual depthwise-separable blocks (activation in the first only), then a pointwise conv."""
    if x.shape[1] != p.width:
        raise ContractViolation(f"REM of width {p.width} got {x.shape[1]} channels")
    block1 = ops.add(ops.leaky_relu(p.dws1(x), slope), x)
    block2 = ops.add(p.dws2(block1), block1)
    return p.pw(block2)


def encoder_forward(x0: Tensor, params: AquaNetParams, slope=ops.LEAKY_SLOPE):
    """Returns ``(bottleneck, skips)``; skips are the REM outputs before each downsampling."""
    skips = []
    x = x0
    for rem, down in zip(params.enc_rems, params.downs):
        s = rem_forward(x, rem, slope)
        skips.append(s)
        x = down(s)
    return x, skips


def decoder_forward(bottleneck: Tensor, skips, L: Optional[Tensor], params: AquaNetParams,
                    enable_illumination=True, slope=ops.LEAKY_SLOPE) -> Tensor:
    """Upsample, fuse ``skip * L_k`` (or the bare skip), refine with a REM; deepest level first."""
    e = bottleneck
    for k in reversed(range(len(skips))):
        s = skips[k]
        u = params.ups[k](ops.upsample_nearest2(e))
        if u.shape != s.shape:
            raise ContractViolation(f"decoder level {k}: upsampled {u.shape} vs skip {s.shape}")
        if enable_illumination:
            if L is None:
                raise ContractViolation("illumination-guided decoding needs an illumination map")
            lk = rescale_illumination(L, s.shape[2], s.shape[3])
            s = ops.elementwise(s, lk, "mul")
        e = rem_forward(ops.add(u, s), params.dec_rems[k], slope)
    return e


@dataclass
class ForwardResult:
    output: Tensor
    illumination: Tensor
    correction: Tensor


def aquanet_forward(image: Tensor, params: AquaNetParams, config: AquaNetConfig) -> ForwardResult:
    """Enhance ``image`` (n, 3, h, w) in [-1, 1]; h and w must be multiples of 8."""
    if image.ndim != 4 or image.shape[1] != 3:
        raise ContractViolation(f"expected an (n, 3, h, w) image, got {image.shape}")
    n, _, h, w = image.shape
    factor = 2 ** config.stages
    if h % factor or w % factor:
        raise ContractViolation(f"image size {h}x{w} is not divisible by {factor}")
    slope = config.leaky_slope

    if config.enable_frequency:
        r_f = frequency_correction(image, params.freq)
        x0 = fuse_input(image, r_f, params.freq.proj_p, params.stem)
    else:
        r_f = Tensor(np.zeros_like(image.data))
        x0 = params.stem(image)

    if config.enable_illumination:
        a_map, b_map = predict_coefficients(image, params.illum)
        L = illumination_map(a_map, b_map)
    else:
        L = Tensor(np.ones((n, 1, h, w), dtype=image.dtype))

    bottleneck, skips = encoder_forward(x0, params, slope)
    d1 = decoder_forward(bottleneck, skips, L, params, config.enable_illumination, slope)
    return ForwardResult(ops.tanh(params.head(d1)), L, r_f)


def init_params(config: AquaNetConfig, seed: int, dtype=np.float32) -> AquaNetParams:
    """Deterministic initialisation: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    REM output convolutions start as the identity.
    """
    c0 = config.base_channels
    enc_rems, downs, ups, dec_rems = [], [], [], []
    for k in range(config.stages):
        c = config.width(k)
        enc_rems.append(REMParams.init(f"enc{k}.rem", c, seed, dtype))
        downs.append(Conv.init(f"enc{k}.down", c, 2 * c, 3, seed, dtype, stride=2))
        ups.append(Conv.init(f"dec{k}.up", 2 * c, c, 3, seed, dtype))
        dec_rems.append(REMParams.init(f"dec{k}.rem", c, seed, dtype))
    return AquaNetParams(
        stem=Conv.init("stem", 3, c0, 3, seed, dtype),
        enc_rems=enc_rems, downs=downs, ups=ups, dec_rems=dec_rems,
        head=Conv.init("head", c0, 3, 3, seed, dtype),
        freq=FrequencyBlockParams.init(c0, seed, dtype) if config.enable_frequency else None,
        illum=IlluminationParams.init(seed, dtype) if config.enable_illumination else None,
    )


def count_params(params) -> int:
    if params is None:
        return 0
    items = params.params() if hasattr(params, "params") else list(params)
    return int(sum(p.data.size for p in items))


def conv_layout(config: AquaNetConfig, h: int, w: int):
    """Yield ``(name, k, c_in_per_group, c_out, h_out, w_out)`` for every convolution."""
    c0 = config.base_channels
    if config.enable_frequency:
        from .spectral import MOD_HIDDEN
        yield "freq.mod1", 3, 3, MOD_HIDDEN, h, w
        yield "freq.mod2", 3, MOD_HIDDEN, 3, h, w
        yield "freq.proj", 3, 3, c0, h, w
    if config.enable_illumination:
        from .illumination import HIDDEN
        yield "illum.conv1", 3, 3, HIDDEN, h, w
        yield "illum.conv2", 3, HIDDEN, HIDDEN, h, w
        yield "illum.conv3", 3, HIDDEN, 2, h, w
    yield "stem", 3, 3, c0, h, w

    def rem(name, c, hh, ww):
        for blk in ("dws1", "dws2"):
            yield f"{name}.{blk}.dw", 3, 1, c, hh, ww
            yield f"{name}.{blk}.pw", 1, c, c, hh, ww
        yield f"{name}.pw", 1, c, c, hh, ww

    for k in range(config.stages):
        c, hh, ww = config.width(k), h >> k, w >> k
        yield from rem(f"enc{k}.rem", c, hh, ww)
        yield f"enc{k}.down", 3, c, 2 * c, hh // 2, ww // 2
    for k in reversed(range(config.stages)):
        c, hh, ww = config.width(k), h >> k, w >> k
        yield f"dec{k}.up", 3, 2 * c, c, hh, ww
        yield from rem(f"dec{k}.rem", c, hh, ww)
    yield "head", 3, c0, 3, h, w


def count_flops(config: AquaNetConfig, h: int, w: int) -> int:
    """Convolution FLOPs (a multiply-accumulate is 2) plus 5 N log2 N per channel per FFT.

    Pointwise activations, additions and resampling are not counted.
    """
    total = sum(2 * k * k * cin * cout * ho * wo for _, k, cin, cout, ho, wo in conv_layout(config, h, w))
    if config.enable_frequency:
        hw = h * w
        total += 2 * 3 * int(round(5 * hw * math.log2(hw)))
    return int(total)
