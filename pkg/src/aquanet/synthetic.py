"""Synthetic underwater image pairs for smoke tests and demos.

Clean scenes are smooth mixtures of coloured blobs over a gradient; the
degraded version applies a per-channel attenuation ``exp(-beta_c * depth)``
and adds back-scatter ``B_c * (1 - t_c)``, with red attenuating fastest.
"""
from __future__ import annotations

import numpy as np

WATER_BETA = np.array([1.6, 0.45, 0.3])
BACKSCATTER = np.array([0.05, 0.35, 0.45])


def clean_scene(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    img = np.empty((size, size, 3))
    base = rng.uniform(0.2, 0.8, size=3)
    tilt = rng.uniform(-0.3, 0.3, size=(2, 3))
    img[:] = base + tilt[0] * yy[..., None] + tilt[1] * xx[..., None]
    for _ in range(5):
        cy, cx = rng.uniform(0, 1, size=2)
        r = rng.uniform(0.08, 0.3)
        colour = rng.uniform(-0.5, 0.5, size=3)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        img += blob[..., None] * colour
    return np.clip(img, 0.0, 1.0)


def degrade(clean, rng):
    size = clean.shape[0]
    yy = np.linspace(0, 1, size)[:, None]
    depth = rng.uniform(0.5, 1.0) + 0.8 * yy * np.ones((1, size))
    t = np.exp(-WATER_BETA * depth[..., None])
    return np.clip(clean * t + BACKSCATTER * (1 - t), 0.0, 1.0)


def synthetic_pairs(n, size, seed=0):
    """``(raw, reference)`` lists of 8-bit HxWx3 images."""
    rng = np.random.default_rng(seed)
    raws, refs = [], []
    for _ in range(n):
        clean = clean_scene(rng, size)
        raws.append(np.round(degrade(clean, rng) * 255).astype(np.uint8))
        refs.append(np.round(clean * 255).astype(np.uint8))
    return raws, refs
