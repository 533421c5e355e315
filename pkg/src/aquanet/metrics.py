"""Full-reference (PSNR, SSIM) and no-reference (UIQM, UCIQE) image quality metrics.

All functions take 8-bit RGB images as ``(h, w, 3)`` uint8 arrays.

Pinned conventions (published implementations disagree on these):

* SSIM on BT.601 luma, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
  averaged over valid window positions only.
* UICM trims ``ceil(0.1 K)`` samples from the low tail and ``floor(0.1 K)``
  from the high tail; the variance is taken over all K samples about the
  trimmed mean.
* UISM and UIConM use complete 8x8 blocks (a trailing partial row/column of
  blocks is ignored). EME blocks with a zero minimum contribute nothing.
* UIConM is the PLIP mean (gamma = 1026) of ``-m ln m`` over blocks, where
  ``m = (max - min) / (max + min)`` in PLIP arithmetic; this keeps it
  non-negative and bounded by gamma.
* UCIQE uses L*/100 and C*/100, the 1st/99th L* percentiles (linear
  interpolation) and saturation ``C / sqrt(C^2 + L^2)``.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .color import luminance, rgb8_to_lab
from .errors import ContractViolation

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03

UIQM_WEIGHTS = (0.0282, 0.2953, 3.5753)
UCIQE_WEIGHTS = (0.4680, 0.2745, 0.2576)
TRIM = 0.1
BLOCK = 8
PLIP_GAMMA = 1026.0


def _check_rgb8(img, name="image"):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractViolation(f"{name} must be (h, w, 3), got {img.shape}")
    return img


def _same_dims(a, b):
    a, b = _check_rgb8(a, "a"), _check_rgb8(b, "b")
    if a.shape != b.shape:
        raise ContractViolation(f"image dimensions differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio in dB over all channels; ``inf`` for identical images."""
    a, b = _same_dims(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    rows = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(rows, g.size, axis=1) @ g


def ssim(a, b):
    """Mean structural similarity on BT.601 luma."""
    a, b = _same_dims(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ContractViolation(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    x, y = luminance(a), luminance(b)
    g = gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------- UIQM

def _trimmed_stats(values):
    v = np.sort(values.reshape(-1))
    k = v.size
    lo = math.ceil(TRIM * k)
    hi = math.floor(TRIM * k)
    mu = float(np.mean(v[lo:k - hi]))
    var = float(np.mean((v - mu) ** 2))
    return mu, var


def uicm(img):
    """Colourfulness from trimmed statistics of the RG and YB opponent channels."""
    rgb = _check_rgb8(img).astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mu_rg, var_rg = _trimmed_stats(r - g)
    mu_yb, var_yb = _trimmed_stats((r + g) / 2.0 - b)
    return -0.0268 * math.sqrt(mu_rg ** 2 + mu_yb ** 2) + 0.1586 * math.sqrt(var_rg + var_yb)


def _blocks(ch, size=BLOCK):
    h, w = ch.shape[0] // size, ch.shape[1] // size
    return ch[:h * size, :w * size].reshape(h, size, w, size).swapaxes(1, 2).reshape(h, w, -1)


def sobel_magnitude(ch):
    p = np.pad(ch, 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.hypot(gx, gy)


def eme(ch, size=BLOCK):
    blocks = _blocks(ch, size)
    if blocks.size == 0:
        return 0.0
    lo, hi = blocks.min(axis=-1), blocks.max(axis=-1)
    ok = lo > 0
    terms = np.zeros_like(lo)
    terms[ok] = np.log(hi[ok] / lo[ok])
    return float(2.0 / lo.size * terms.sum())


def uism(img):
    """Sharpness: luma-weighted EME of each channel's Sobel edge map times the channel."""
    rgb = _check_rgb8(img).astype(np.float64)
    return sum(wt * eme(sobel_magnitude(rgb[..., c]) * rgb[..., c])
               for c, wt in enumerate((0.299, 0.587, 0.114)))


def plip_add(a, b, gamma=PLIP_GAMMA):
    return a + b - a * b / gamma


def plip_sub(a, b, gamma=PLIP_GAMMA):
    return gamma * (a - b) / (gamma - b)


def plip_scale(c, a, gamma=PLIP_GAMMA):
    return gamma - gamma * (1.0 - a / gamma) ** c


def uiconm(img, size=BLOCK):
    """Contrast: PLIP logAMEE of the luma image."""
    gray = luminance(_check_rgb8(img))
    blocks = _blocks(gray, size)
    if blocks.size == 0:
        return 0.0
    lo, hi = blocks.min(axis=-1).ravel(), blocks.max(axis=-1).ravel()
    den = plip_add(hi, lo)
    num = plip_sub(hi, lo)
    m = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    terms = np.zeros_like(m)
    pos = m > 0
    terms[pos] = -m[pos] * np.log(m[pos])
    # PLIP mean: gamma * (1 - prod(1 - t/gamma) ** (1/B)), via logs
    log_rest = np.sum(np.log1p(-terms / PLIP_GAMMA)) / terms.size
    return float(-PLIP_GAMMA * math.expm1(log_rest))


def uiqm(img):
    c1, c2, c3 = UIQM_WEIGHTS
    return c1 * uicm(img) + c2 * uism(img) + c3 * uiconm(img)


# ---------------------------------------------------------------- UCIQE

def uciqe(img):
    lab = rgb8_to_lab(_check_rgb8(img))
    light = lab[..., 0] / 100.0
    chroma = np.hypot(lab[..., 1], lab[..., 2]) / 100.0
    sigma_c = float(np.std(chroma))
    p1, p99 = np.percentile(light, [1, 99])
    con_l = float(p99 - p1)
    radius = np.hypot(chroma, light)
    sat = np.divide(chroma, radius, out=np.zeros_like(chroma), where=radius > 0)
    c1, c2, c3 = UCIQE_WEIGHTS
    return c1 * sigma_c + c2 * con_l + c3 * float(np.mean(sat))


ALL_METRICS = ("psnr", "ssim", "uiqm", "uciqe")
REFERENCE_METRICS = ("psnr", "ssim")


def metric_report(img, reference=None, metrics=ALL_METRICS):
    """Dict of the requested metrics; reference metrics are skipped without a reference."""
    out = {}
    for name in metrics:
        if name in REFERENCE_METRICS:
            if reference is None:
                continue
            out[name] = psnr(img, reference) if name == "psnr" else ssim(img, reference)
        elif name == "uiqm":
            out[name] = uiqm(img)
        elif name == "uciqe":
            out[name] = uciqe(img)
        else:
            raise ContractViolation(f"unknown metric {name!r}")
    return out
