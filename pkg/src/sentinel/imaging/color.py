"""Colour space conversions on 8-bit buffers.

Images are numpy arrays: ``(H, W)`` for single-channel and ``(H, W, 3)``
for RGB, always ``uint8``. Hue is stored on the full 8-bit range, i.e.
``H = hue_degrees * 255 / 360`` (not the 0..180 convention some libraries use).
"""

from __future__ import annotations

import numpy as np


def _require_rgb(src: np.ndarray) -> None:
    if src.ndim != 3 or src.shape[2] != 3:
        raise ValueError(f"expected a 3-channel image, got shape {src.shape}")


def rgb_to_hsv(src: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV with every channel in [0, 255]."""
    _require_rgb(src)
    rgb = src.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    vmax = rgb.max(axis=2)
    vmin = rgb.min(axis=2)
    delta = vmax - vmin

    sat = np.zeros_like(vmax)
    nz = vmax > 0
    sat[nz] = 255.0 * delta[nz] / vmax[nz]

    hue = np.zeros_like(vmax)
    chroma = delta > 0
    safe = np.where(chroma, delta, 1.0)
    is_r = chroma & (vmax == r)
    is_g = chroma & (vmax == g) & ~is_r
    is_b = chroma & ~is_r & ~is_g
    hue[is_r] = ((g - b)[is_r] / safe[is_r]) % 6.0
    hue[is_g] = (b - r)[is_g] / safe[is_g] + 2.0
    hue[is_b] = (r - g)[is_b] / safe[is_b] + 4.0
    hue_deg = hue * 60.0

    out = np.empty(src.shape, dtype=np.uint8)
    out[..., 0] = np.clip(np.rint(hue_deg * 255.0 / 360.0), 0, 255)
    out[..., 1] = np.clip(np.rint(sat), 0, 255)
    out[..., 2] = vmax.astype(np.uint8)
    return out


def saturation(src: np.ndarray) -> np.ndarray:
    """The S plane of :func:`rgb_to_hsv`."""
    return rgb_to_hsv(src)[..., 1]


def srgb_to_linear(values: np.ndarray) -> np.ndarray:
    c = values / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def lab_lightness(src: np.ndarray) -> np.ndarray:
    """CIE L* in [0, 100] as float64 (sRGB input, D65 white)."""
    _require_rgb(src)
    lin = srgb_to_linear(src.astype(np.float64))
    # Y row of the sRGB -> XYZ matrix; Yn = 1 for D65.
    y = 0.2126729 * lin[..., 0] + 0.7151522 * lin[..., 1] + 0.0721750 * lin[..., 2]
    eps = (6.0 / 29.0) ** 3
    f = np.where(y > eps, np.cbrt(y), y / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    return 116.0 * f - 16.0


def rgb_to_lab_l(src: np.ndarray) -> np.ndarray:
    """L* channel rescaled from [0, 100] to [0, 255]."""
    lightness = lab_lightness(src)
    return np.clip(np.rint(lightness * 255.0 / 100.0), 0, 255).astype(np.uint8)


def rgb_to_gray(src: np.ndarray) -> np.ndarray:
    """Rec. 601 luma, used by the fiducial detector."""
    if src.ndim == 2:
        return src
    _require_rgb(src)
    rgb = src.astype(np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)
