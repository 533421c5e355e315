"""
Orthonormal 2D FFT and the frequency correction block
=====================================================

Walks through the transform used by the spectral branch, checks it
against numpy, and shows that the block keeps the phase of every bin.
"""
import numpy as np

from aquanet import fft
from aquanet.spectral import (FrequencyBlockParams, enhanced_spectrum, fft2d_ortho,
                              frequency_correction)
from aquanet.tensor import Tensor

rng = np.random.default_rng(0)

# a small image, one channel, 128 x 96 (one radix-2 side, one Bluestein side)
x = rng.standard_normal((1, 1, 128, 96))
X = fft.fft2(x)
print("max |fft2 - numpy|:", np.abs(X - np.fft.fft2(x, norm="ortho")).max())
print("round trip error  :", np.abs(fft.ifft2(X).real - x).max())
print("energy ratio      :", (np.abs(X) ** 2).sum() / (x ** 2).sum())

# %% the correction map on a random RGB batch
params = FrequencyBlockParams.init(base_channels=8, seed=1, dtype=np.float64)
img = Tensor(rng.uniform(-1, 1, (2, 3, 32, 32)))
r_f = frequency_correction(img, params)
print("R_f shape:", r_f.shape, " mean |R_f|:", np.abs(r_f.data).mean())

# %% phase is untouched wherever the magnitude is meaningful
spec_in = fft2d_ortho(img).to_complex()
spec_out = enhanced_spectrum(img, params)[0].to_complex()
mask = np.abs(spec_in) > 1e-3
dphi = np.angle(spec_out[mask] * np.conj(spec_in[mask]))
print("worst phase drift over", mask.sum(), "bins:", np.abs(dphi).max())
