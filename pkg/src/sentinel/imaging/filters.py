"""Smoothing, contrast enhancement and binary morphology.

Every filter reads only inside its input: borders are handled by replicating
the nearest edge pixel.
"""

from __future__ import annotations

import math

import numpy as np


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian with radius ``ceil(3 * sigma)``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def convolve_separable(src: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve rows then columns with a symmetric 1-D kernel (float output)."""
    radius = len(kernel) // 2
    img = np.asarray(src, dtype=np.float64)
    h, w = img.shape
    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    rows = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        rows += kv * padded[:, i : i + w]
    padded = np.pad(rows, ((radius, radius), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * padded[i : i + h, :]
    return out


def gaussian_blur(src: np.ndarray, sigma: float) -> np.ndarray:
    if src.ndim != 2:
        raise ValueError("gaussian_blur expects a single-channel image")
    out = convolve_separable(src, gaussian_kernel(sigma))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def box_sum(src: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)^2 window around each pixel, clamp-to-border."""
    img = np.asarray(src, dtype=np.int64)
    h, w = img.shape
    padded = np.pad(img, radius, mode="edge")
    integral = np.zeros((h + 2 * radius + 1, w + 2 * radius + 1), dtype=np.int64)
    integral[1:, 1:] = padded.cumsum(0).cumsum(1)
    n = 2 * radius + 1
    return (
        integral[n : n + h, n : n + w]
        - integral[0:h, n : n + w]
        - integral[n : n + h, 0:w]
        + integral[0:h, 0:w]
    )


def _shift_reduce(mask: np.ndarray, radius: int, reduce) -> np.ndarray:
    if radius == 0:
        return mask.copy()
    h, w = mask.shape
    padded = np.pad(mask, ((0, 0), (radius, radius)), mode="edge")
    acc = padded[:, 0:w].copy()
    for i in range(1, 2 * radius + 1):
        reduce(acc, padded[:, i : i + w], out=acc)
    padded = np.pad(acc, ((radius, radius), (0, 0)), mode="edge")
    out = padded[0:h, :].copy()
    for i in range(1, 2 * radius + 1):
        reduce(out, padded[i : i + h, :], out=out)
    return out


def dilate(src: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1)x(2r+1) square structuring element."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return _shift_reduce(np.asarray(src, dtype=bool), radius, np.logical_or)


def erode(src: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a square element; outside pixels replicate the border."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return _shift_reduce(np.asarray(src, dtype=bool), radius, np.logical_and)


def median_filter(src: np.ndarray, radius: int) -> np.ndarray:
    """Binary median: majority vote over the (2r+1)^2 window."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    counts = box_sum(np.asarray(src, dtype=bool), radius)
    n = (2 * radius + 1) ** 2
    return counts * 2 > n


def _tile_edges(size: int, n: int) -> np.ndarray:
    return np.array([(i * size) // n for i in range(n + 1)], dtype=np.int64)


def clahe_luts(src: np.ndarray, tile_grid: tuple[int, int], clip_limit: float) -> np.ndarray:
    """Per-tile mapping tables, shape ``(ny, nx, 256)``."""
    nx, ny = tile_grid
    h, w = src.shape
    xs, ys = _tile_edges(w, nx), _tile_edges(h, ny)
    luts = np.zeros((ny, nx, 256), dtype=np.float64)
    for ty in range(ny):
        for tx in range(nx):
            tile = src[ys[ty] : ys[ty + 1], xs[tx] : xs[tx + 1]]
            area = tile.size
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            if math.isfinite(clip_limit):
                limit = clip_limit * area / 256.0
                excess = np.maximum(hist - limit, 0.0).sum()
                hist = np.minimum(hist, limit) + excess / 256.0
            cdf = np.cumsum(hist) / area
            luts[ty, tx] = np.minimum(np.floor(255.0 * cdf + 1e-9), 255.0)
    return luts


def _interp_axis(size: int, edges: np.ndarray):
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(size, dtype=np.float64)
    n = len(centers)
    if n == 1:
        return np.zeros(size, dtype=np.int64), np.zeros(size, dtype=np.int64), np.zeros(size)
    lo = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, n - 2)
    frac = np.clip((pos - centers[lo]) / (centers[lo + 1] - centers[lo]), 0.0, 1.0)
    return lo, lo + 1, frac


def clahe(src: np.ndarray, tile_grid: tuple[int, int] = (8, 8), clip_limit: float = 2.0) -> np.ndarray:
    """Contrast limited adaptive histogram equalisation.

    ``clip_limit`` is a multiple of the uniform bin height (tile_area / 256);
    pass ``math.inf`` for plain per-tile equalisation. Tile mappings are
    blended bilinearly between tile centres.
    """
    if src.ndim != 2:
        raise ValueError("clahe expects a single-channel image")
    nx, ny = tile_grid
    h, w = src.shape
    if nx < 1 or ny < 1:
        raise ValueError("tile grid must be at least 1x1")
    if nx > w or ny > h:
        raise ValueError(f"tile grid {tile_grid} larger than image {w}x{h}")
    if clip_limit < 1.0:
        raise ValueError("clip_limit must be >= 1.0")
    img = np.asarray(src, dtype=np.uint8)
    luts = clahe_luts(img, tile_grid, clip_limit)
    x0, x1, fx = _interp_axis(w, _tile_edges(w, nx))
    y0, y1, fy = _interp_axis(h, _tile_edges(h, ny))
    fx = fx[None, :]
    fy = fy[:, None]
    top = (1 - fx) * luts[y0[:, None], x0[None, :], img] + fx * luts[y0[:, None], x1[None, :], img]
    bot = (1 - fx) * luts[y1[:, None], x0[None, :], img] + fx * luts[y1[:, None], x1[None, :], img]
    out = (1 - fy) * top + fy * bot
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
