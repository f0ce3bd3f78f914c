"""Connected component labelling of binary masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass
class LabelMap:
    """Dense labels (0 = background) and the number of components."""

    labels: np.ndarray
    count: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def areas(self) -> np.ndarray:
        """Pixel count per label; index 0 is the background."""
        return np.bincount(self.labels.ravel(), minlength=self.count + 1)

    def mask(self, label: int) -> np.ndarray:
        return self.labels == label


def connected_components(src: np.ndarray, connectivity: int = 8) -> LabelMap:
    """Label foreground components.

    Labels are numbered in raster order of each component's first pixel.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(src, dtype=bool)
    labels, count = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    if count:
        # Force first-occurrence ordering regardless of the backend's scan.
        flat = labels.ravel()
        uniq, first = np.unique(flat, return_index=True)
        fg = uniq > 0  # background may be absent
        order = uniq[fg][np.argsort(first[fg])]
        remap = np.zeros(count + 1, dtype=labels.dtype)
        remap[order] = np.arange(1, count + 1, dtype=labels.dtype)
        labels = remap[labels]
    return LabelMap(labels=labels.astype(np.int32), count=int(count))


@dataclass(frozen=True)
class ComponentStats:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # x, y, w, h
    centroid: tuple[float, float]  # x, y


def component_stats(lmap: LabelMap) -> list[ComponentStats]:
    if lmap.count == 0:
        return []
    labels = lmap.labels
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    n = lmap.count + 1
    area = np.bincount(lab, minlength=n)
    sx = np.bincount(lab, weights=xs, minlength=n)
    sy = np.bincount(lab, weights=ys, minlength=n)
    xmin = np.full(n, np.iinfo(np.int64).max)
    ymin = np.full(n, np.iinfo(np.int64).max)
    xmax = np.full(n, -1)
    ymax = np.full(n, -1)
    np.minimum.at(xmin, lab, xs)
    np.minimum.at(ymin, lab, ys)
    np.maximum.at(xmax, lab, xs)
    np.maximum.at(ymax, lab, ys)
    stats = []
    for i in range(1, n):
        stats.append(
            ComponentStats(
                label=i,
                area=int(area[i]),
                bbox=(int(xmin[i]), int(ymin[i]), int(xmax[i] - xmin[i] + 1), int(ymax[i] - ymin[i] + 1)),
                centroid=(float(sx[i] / area[i]), float(sy[i] / area[i])),
            )
        )
    return stats


def remove_small(mask: np.ndarray, min_area: int, connectivity: int = 8) -> np.ndarray:
    """Drop components smaller than ``min_area`` pixels."""
    lmap = connected_components(mask, connectivity)
    if lmap.count == 0:
        return np.zeros(lmap.shape, dtype=bool)
    keep = lmap.areas() >= min_area
    keep[0] = False
    return keep[lmap.labels]
