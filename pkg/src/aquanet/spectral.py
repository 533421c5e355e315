"""Frequency enhancement block.

The input image is taken to the Fourier domain, its magnitude normalised
per channel and re-weighted by a small learned modulation network, and the
result (with the original phase) brought back to the image domain. The
difference to the input is the frequency correction map, which is projected
to feature space and added to the stem features.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fft, ops
from .errors import InternalConsistencyError
from .layers import Conv
from .tensor import Param, Tensor, record

EPS_MAG = 1e-12
EPS_NORM = 1e-8
IMAG_TOLERANCE = 1e-4
MOD_HIDDEN = 8
ALPHA_INIT = 0.1


@dataclass
class ComplexSpectrum:
    re: Tensor
    im: Tensor

    @property
    def shape(self):
        return self.re.shape

    def to_complex(self):
        return self.re.data + 1j * self.im.data


@dataclass
class FrequencyBlockParams:
    w1: Conv
    w2: Conv
    alpha: Param
    proj_p: Conv
    eps: float = EPS_NORM
    eps_mag: float = EPS_MAG

    @classmethod
    def init(cls, base_channels, seed, dtype, prefix="freq"):
        return cls(
            w1=Conv.init(f"{prefix}.mod1", 3, MOD_HIDDEN, 3, seed, dtype),
            w2=Conv.init(f"{prefix}.mod2", MOD_HIDDEN, 3, 3, seed, dtype),
            alpha=Param(np.asarray(ALPHA_INIT, dtype=dtype), f"{prefix}.alpha"),
            proj_p=Conv.init(f"{prefix}.proj", 3, base_channels, 3, seed, dtype),
        )

    def params(self):
        return [*self.w1.params(), *self.w2.params(), self.alpha, *self.proj_p.params()]


def fft2d_ortho(x: Tensor) -> ComplexSpectrum:
    y = fft.fft2(x.data)
    dt = x.dtype
    re = record("fft2d.re", y.real.astype(dt), (x,),
                lambda g: (fft.ifft2(g).real.astype(dt),))
    im = record("fft2d.im", y.imag.astype(dt), (x,),
                lambda g: (-fft.ifft2(g).imag.astype(dt),))
    return ComplexSpectrum(re, im)


def ifft2d_ortho(spec: ComplexSpectrum) -> ComplexSpectrum:
    z = fft.ifft2(spec.to_complex())
    dt = spec.re.dtype

    def bw_re(g):
        f = fft.fft2(g)
        return f.real.astype(dt), f.imag.astype(dt)

    def bw_im(g):
        f = fft.fft2(g)
        return -f.imag.astype(dt), f.real.astype(dt)

    ins = (spec.re, spec.im)
    return ComplexSpectrum(record("ifft2d.re", z.real.astype(dt), ins, bw_re),
                           record("ifft2d.im", z.imag.astype(dt), ins, bw_im))


def magnitude_phase(spec: ComplexSpectrum, eps_mag=EPS_MAG):
    """Regularised magnitude and the unit phasor ``spec / M``."""
    m = ops.sqrt(ops.add(ops.add(ops.square(spec.re), ops.square(spec.im)), eps_mag))
    return m, ComplexSpectrum(ops.div(spec.re, m), ops.div(spec.im, m))


def normalize_magnitude(m: Tensor, eps=EPS_NORM):
    mu = ops.mean(m, axis=(2, 3), keepdims=True)
    return ops.div(m, ops.add(mu, eps)), mu


def modulation_map(m_norm: Tensor, params: FrequencyBlockParams) -> Tensor:
    hidden = ops.leaky_relu(params.w1(m_norm))
    return ops.sigmoid(params.w2(hidden))


def enhance_magnitude(m_norm: Tensor, s: Tensor, alpha) -> Tensor:
    return ops.mul(m_norm, ops.add(ops.mul(s, alpha), 1.0))


def hermitian_part(spec: ComplexSpectrum) -> ComplexSpectrum:
    """Project onto spectra of real images: ``(Z(k) + conj(Z(-k))) / 2``.

    The modulation map is produced by a convolution on the unshifted DFT
    grid, so it is not symmetric under ``k -> -k``; this projection is
    exactly what taking the real part of the inverse transform would do,
    but leaves an inverse whose imaginary residue is pure round-off.
    """
    re = ops.mul(ops.add(spec.re, ops.reflect_frequency(spec.re)), 0.5)
    im = ops.mul(ops.sub(spec.im, ops.reflect_frequency(spec.im)), 0.5)
    return ComplexSpectrum(re, im)


def enhanced_spectrum(image: Tensor, params: FrequencyBlockParams):
    """Return ``(spectrum, enhanced)`` where ``enhanced = M* . spectrum / M``."""
    spec = fft2d_ortho(image)
    m, unit = magnitude_phase(spec, params.eps_mag)
    m_norm, _ = normalize_magnitude(m, params.eps)
    s = modulation_map(m_norm, params)
    m_star = enhance_magnitude(m_norm, s, params.alpha)
    return spec, ComplexSpectrum(ops.mul(m_star, unit.re), ops.mul(m_star, unit.im))


def frequency_correction(image: Tensor, params: FrequencyBlockParams) -> Tensor:
    """Correction map: inverse transform of the enhanced spectrum minus the input."""
    _, enhanced = enhanced_spectrum(image, params)
    recon = ifft2d_ortho(hermitian_part(enhanced))
    residue = float(np.max(np.abs(recon.im.data))) if recon.im.data.size else 0.0
    if residue >= IMAG_TOLERANCE:
        raise InternalConsistencyError(
            f"inverse FFT imaginary residue {residue:.3g} exceeds {IMAG_TOLERANCE}")
    return ops.sub(recon.re, image)


def fuse_input(image: Tensor, r_f: Tensor, proj_p: Conv, proj_0: Conv) -> Tensor:
    """Stem features plus the projected correction map."""
    return ops.add(proj_p(r_f), proj_0(image))
