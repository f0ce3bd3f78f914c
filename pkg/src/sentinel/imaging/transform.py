"""Resampling helpers."""

from __future__ import annotations

import numpy as np
from PIL import Image


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resize to ``size = (width, height)`` with Pillow's bilinear filter.

    When shrinking, Pillow widens the triangle filter by the scale factor, so
    small objects are averaged away rather than aliased.
    """
    w, h = size
    if img.shape[1] == w and img.shape[0] == h:
        return img.copy()
    out = Image.fromarray(np.ascontiguousarray(img)).resize((w, h), Image.BILINEAR)
    return np.asarray(out, dtype=np.uint8)


def sample_bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear lookup at float coordinates (clamped to the image)."""
    h, w = img.shape[:2]
    x = np.clip(x, 0, w - 1)
    y = np.clip(y, 0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    f = img.astype(np.float64)
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    return top * (1 - fy) + bot * fy
