"""Orthonormal 2-D discrete Fourier transform.

Iterative radix-2 butterflies for power-of-two lengths; any other length goes
through Bluestein's chirp-z reformulation on a padded power-of-two grid.
Twiddle and chirp tables are cached per length and never mutated.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bitrev(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size, inverse):
    sign = 1.0 if inverse else -1.0
    tw = np.exp(sign * 2j * np.pi * np.arange(size // 2) / size)
    tw.setflags(write=False)
    return tw


def _fft_pow2(x, inverse):
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x[..., _bitrev(n)]
    size = 2
    while size <= n:
        half = size // 2
        y = y.reshape(lead + (n // size, size))
        even = y[..., :half]
        odd = y[..., half:] * _twiddles(size, inverse)
        y = np.concatenate((even + odd, even - odd), axis=-1)
        size *= 2
    return y.reshape(lead + (n,))


@lru_cache(maxsize=None)
def _bluestein_tables(n, inverse):
    m = 1 << (2 * n - 1).bit_length()
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp argument small for large n
    sign = 1.0 if inverse else -1.0
    chirp = np.exp(sign * 1j * np.pi * ((k * k) % (2 * n)) / n)
    b = np.zeros(m, dtype=complex)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    fb = _fft_pow2(b, inverse=False)
    chirp.setflags(write=False)
    fb.setflags(write=False)
    return m, chirp, fb


def _fft_any(x, inverse):
    n = x.shape[-1]
    if _is_pow2(n):
        return _fft_pow2(x, inverse)
    m, chirp, fb = _bluestein_tables(n, inverse)
    a = np.zeros(x.shape[:-1] + (m,), dtype=complex)
    a[..., :n] = x * chirp
    conv = _fft_pow2(_fft_pow2(a, False) * fb, True) / m
    return conv[..., :n] * chirp


def dft_last_axis(x, inverse=False):
    """Unnormalised DFT along the last axis (sign +1 in the exponent when ``inverse``)."""
    return _fft_any(np.asarray(x, dtype=complex), inverse)


def fft2(x):
    """Orthonormal forward 2-D DFT over the last two axes; returns complex128."""
    h, w = x.shape[-2:]
    y = _fft_any(np.asarray(x, dtype=complex), False)
    y = np.swapaxes(_fft_any(np.swapaxes(y, -1, -2), False), -1, -2)
    return y / np.sqrt(h * w)


def ifft2(x):
    """Inverse of :func:`fft2`."""
    h, w = x.shape[-2:]
    y = _fft_any(np.asarray(x, dtype=complex), True)
    y = np.swapaxes(_fft_any(np.swapaxes(y, -1, -2), True), -1, -2)
    return y / np.sqrt(h * w)
