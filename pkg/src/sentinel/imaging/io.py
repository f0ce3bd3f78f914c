"""Image file I/O (PNG, binary PPM/PGM) backed by Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")


def read_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit image as ``(H, W)`` gray or ``(H, W, 3)`` RGB."""
    with Image.open(path) as im:
        if im.mode in ("L", "1"):
            return np.asarray(im.convert("L"), dtype=np.uint8).copy()
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path: str | Path, img: np.ndarray) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {arr.dtype}")
    path = Path(path)
    fmt = "PNG" if path.suffix.lower() == ".png" else "PPM"
    Image.fromarray(arr).save(path, format=fmt)


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    """Store a binary mask as a {0, 255} PGM."""
    write_image(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_mask(path: str | Path) -> np.ndarray:
    img = read_image(path)
    if img.ndim == 3:
        img = img[..., 0]
    return img > 127


def list_frames(directory: str | Path) -> list[Path]:
    """Image files in ``directory`` in name order."""
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
