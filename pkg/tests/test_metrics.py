import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from aquanet.color import luminance, rgb8_to_lab
from aquanet.errors import ContractViolation
from aquanet.metrics import (eme, metric_report, plip_add, plip_scale, plip_sub, psnr, ssim, uciqe, uicm, uiconm,
                             uiqm, uism)

from oracles import psnr_naive, ssim_naive, uicm_scalar


def rand_img(seed, h=16, w=16):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


img16 = arrays(np.uint8, (16, 16, 3))


# -------------------------------------------------------------------- PSNR

def test_psnr_cases():
    a = rand_img(0)
    assert psnr(a, a) == math.inf
    assert psnr(np.zeros((4, 4, 3), np.uint8), np.full((4, 4, 3), 255, np.uint8)) == 0.0
    b = a.astype(int)
    b[..., 0] ^= 1  # every red value off by exactly one
    b[..., 1:] = a[..., 1:]
    assert psnr(a, b.astype(np.uint8)) == pytest.approx(10 * math.log10(255 ** 2 / (1 / 3)), abs=1e-9)
    c = np.clip(a.astype(int) + np.where(a < 255, 1, -1), 0, 255).astype(np.uint8)
    assert psnr(a, c) == pytest.approx(48.1308036, abs=1e-6)


def test_psnr_dims():
    with pytest.raises(ContractViolation):
        psnr(rand_img(0, 4, 4), rand_img(0, 4, 5))


@settings(max_examples=30, deadline=None)
@given(img16, img16)
def test_psnr_oracle_and_symmetry(a, b):
    assert psnr(a, b) == psnr(b, a)
    expected = psnr_naive(a, b)
    if math.isinf(expected):
        assert psnr(a, b) == math.inf
    else:
        assert psnr(a, b) == pytest.approx(expected, abs=1e-6)


# -------------------------------------------------------------------- SSIM

def test_ssim_identity_and_constants():
    a = rand_img(1, 20, 24)
    assert ssim(a, a) == 1.0
    c1 = (0.01 * 255) ** 2
    black, white = np.zeros((11, 11, 3), np.uint8), np.full((11, 11, 3), 255, np.uint8)
    assert ssim(black, white) == pytest.approx(c1 / (255 ** 2 + c1), rel=1e-9)


def test_ssim_too_small():
    with pytest.raises(ContractViolation):
        ssim(rand_img(0, 10, 16), rand_img(1, 10, 16))


@pytest.mark.parametrize("seed", range(4))
def test_ssim_naive_oracle(seed):
    a, b = rand_img(seed), rand_img(seed + 100)
    assert ssim(a, b) == pytest.approx(ssim_naive(a, b), abs=1e-6)
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-9


def test_ssim_matches_skimage():
    skm = pytest.importorskip("skimage.metrics")
    a = rand_img(7, 32, 40)
    noise = np.random.default_rng(8).integers(-30, 31, a.shape)
    b = np.clip(a.astype(int) + noise, 0, 255).astype(np.uint8)
    ref = skm.structural_similarity(luminance(a), luminance(b), data_range=255, gaussian_weights=True,
                                    sigma=1.5, use_sample_covariance=False, win_size=11)
    assert 0.3 < ref < 0.99
    assert ssim(a, b) == pytest.approx(ref, abs=1e-9)


# -------------------------------------------------------------------- UIQM

@pytest.mark.parametrize("v", [0, 77, 128, 255])
def test_uiqm_constant_grey_zero(v):
    g = np.full((32, 32, 3), v, np.uint8)
    assert abs(uicm(g)) < 1e-9 and abs(uism(g)) < 1e-9 and abs(uiconm(g)) < 1e-9
    assert abs(uiqm(g)) < 1e-9


def test_uicm_pure_red_scalar_oracle():
    red = np.zeros((8, 8, 3), np.uint8)
    red[..., 0] = 255
    expected = uicm_scalar([(255.0, 0.0, 0.0)] * 64)
    assert uicm(red) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(-0.0268 * math.hypot(255, 127.5), abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_uicm_random_scalar_oracle(seed):
    img = rand_img(seed, 10, 7)
    pixels = [tuple(map(float, p)) for p in img.reshape(-1, 3)]
    assert uicm(img) == pytest.approx(uicm_scalar(pixels), abs=1e-9)


def eme_loops(ch, size=8):
    h, w = ch.shape[0] // size, ch.shape[1] // size
    total = 0.0
    for i in range(h):
        for j in range(w):
            blk = ch[i * size:(i + 1) * size, j * size:(j + 1) * size]
            if blk.min() > 0:
                total += math.log(blk.max() / blk.min())
    return 2.0 / (h * w) * total


def test_eme_loop_oracle():
    ch = np.random.default_rng(3).uniform(0, 50, (24, 19))
    ch[3, 3] = 0
    assert eme(ch) == pytest.approx(eme_loops(ch), rel=1e-12)


def test_plip_algebra():
    g = 1026.0
    assert plip_add(0.0, 37.0) == 37.0
    assert plip_sub(37.0, 0.0) == pytest.approx(37.0)
    assert plip_scale(1.0, 37.0) == pytest.approx(37.0)
    assert plip_scale(2.0, 37.0) == pytest.approx(plip_add(37.0, 37.0))
    assert plip_add(100.0, 200.0) < g


def test_uiconm_loop_oracle():
    img = rand_img(5, 16, 24)
    y = luminance(img)
    terms = []
    for i in range(2):
        for j in range(3):
            blk = y[i * 8:(i + 1) * 8, j * 8:(j + 1) * 8]
            hi, lo = blk.max(), blk.min()
            den = plip_add(hi, lo)
            m = plip_sub(hi, lo) / den if den > 0 else 0.0
            terms.append(-m * math.log(m) if m > 0 else 0.0)
    prod = 1.0
    for t in terms:
        prod *= 1 - t / 1026.0
    expected = 1026.0 * (1 - prod ** (1 / len(terms)))
    assert uiconm(img) == pytest.approx(expected, rel=1e-10)
    assert uiconm(img) > 0


def test_uiqm_row_permutation_round_trip():
    img = rand_img(6, 24, 24)
    perm = np.random.default_rng(6).permutation(24)
    back = img[perm][np.argsort(perm)]
    assert uiqm(back) == uiqm(img)


# ------------------------------------------------------------------- UCIQE

@pytest.mark.parametrize("v", [0, 90, 200, 255])
def test_uciqe_constant_grey_zero(v):
    assert abs(uciqe(np.full((16, 16, 3), v, np.uint8))) < 1e-9


def test_lab_reference_colours():
    def lab(rgb):
        return rgb8_to_lab(np.array([[rgb]], np.uint8))[0, 0]

    np.testing.assert_allclose(lab((255, 255, 255)), [100, 0, 0], atol=1e-9)
    np.testing.assert_allclose(lab((0, 0, 0)), [0, 0, 0], atol=1e-9)
    # standard D65 colorimetry tables
    np.testing.assert_allclose(lab((255, 0, 0)), [53.24, 80.09, 67.20], atol=0.05)
    np.testing.assert_allclose(lab((0, 255, 0)), [87.73, -86.18, 83.18], atol=0.05)
    np.testing.assert_allclose(lab((0, 0, 255)), [32.30, 79.19, -107.86], atol=0.05)


def test_uciqe_deterministic_and_positive():
    img = rand_img(9, 32, 32)
    assert uciqe(img) == uciqe(img.copy())
    assert uciqe(img) > 0


# ------------------------------------------------------------------ report

def test_metric_report():
    a = rand_img(10, 16, 16)
    full = metric_report(a, a)
    assert full["psnr"] == math.inf and full["ssim"] == 1.0
    assert set(metric_report(a)) == {"uiqm", "uciqe"}
    with pytest.raises(ContractViolation):
        metric_report(a, metrics=("nope",))
