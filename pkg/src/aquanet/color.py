"""sRGB <-> CIE L*a*b* (D65) and luminance helpers."""
import numpy as np

SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# Reference white is the image of RGB (1, 1, 1), so neutral greys map to a* = b* = 0.
WHITE_XYZ = SRGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0

BT601 = np.array([0.299, 0.587, 0.114])


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _f(t):
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)


def rgb8_to_lab(img):
    """(..., 3) uint8 sRGB -> float64 (..., 3) L*a*b*."""
    lin = srgb_to_linear(np.asarray(img, dtype=np.float64) / 255.0)
    xyz = lin @ SRGB_TO_XYZ.T / WHITE_XYZ
    fx, fy, fz = _f(xyz[..., 0]), _f(xyz[..., 1]), _f(xyz[..., 2])
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def luminance(img):
    """BT.601 luma of an (..., 3) image, same scale as the input."""
    return np.asarray(img, dtype=np.float64) @ BT601
