"""
Quality metrics
===============

Reference metrics (PSNR, SSIM) and the two no-reference underwater scores.
"""
import numpy as np

from aquanet.metrics import metric_report
from aquanet.synthetic import synthetic_pairs

raws, refs = synthetic_pairs(3, 64, seed=11)
for i, (r, t) in enumerate(zip(raws, refs)):
    deg = metric_report(r, t)
    clean = metric_report(t)
    print(f"pair {i}: psnr {deg['psnr']:.2f} ssim {deg['ssim']:.3f} | "
          f"uiqm {deg['uiqm']:.3f} -> {clean['uiqm']:.3f}  uciqe {deg['uciqe']:.3f} -> {clean['uciqe']:.3f}")

grey = np.full((32, 32, 3), 128, np.uint8)
print("flat grey:", metric_report(grey))
