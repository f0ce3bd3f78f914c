"""Slicing-aided inference: tile, detect per tile, remap, merge."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..imaging.transform import resize_bilinear
from .boxes import DetectionBox, nms, sort_key
from .detector import DetectorHandle
from .tiling import TilePlan


class TileDetectionError(RuntimeError):
    """Raised when the detector fails on one or more tiles of a frame."""

    def __init__(self, failures: list[tuple[tuple[int, int, int, int], str]]):
        self.failures = failures
        lines = ", ".join(f"tile {t}: {msg}" for t, msg in failures)
        super().__init__(f"detector failed on {len(failures)} tile(s): {lines}")


def _frame_dims(frame: np.ndarray) -> tuple[int, int]:
    return frame.shape[1], frame.shape[0]


def _run_tile(detector: DetectorHandle, frame: np.ndarray, tile):
    x0, y0, w, h = tile
    crop = np.ascontiguousarray(frame[y0 : y0 + h, x0 : x0 + w])
    return [b.shifted(x0, y0) for b in detector.detect(crop)]


def detect_sliced(
    frame: np.ndarray,
    detector: DetectorHandle,
    plan: TilePlan,
    merge_iou: float | None = 0.5,
    workers: int = 1,
) -> list[DetectionBox]:
    """Run ``detector`` on every tile of ``plan`` and merge the results.

    Tile boxes are shifted into frame coordinates, clamped to the frame and
    merged with greedy class-wise NMS at ``merge_iou``. ``merge_iou=None``
    skips the merge (boxes are still returned in canonical order).
    Any tile failure aborts the frame with a :class:`TileDetectionError`.
    """
    if merge_iou is not None and not 0 < merge_iou < 1:
        raise ValueError("merge_iou must be in (0, 1)")
    fw, fh = _frame_dims(frame)
    if plan.frame_size != (fw, fh):
        raise ValueError(f"tile plan is for {plan.frame_size}, frame is {(fw, fh)}")

    results: list[list[DetectionBox] | None] = [None] * len(plan.tiles)
    failures = []

    def work(i):
        try:
            results[i] = _run_tile(detector, frame, plan.tiles[i])
        except Exception as exc:  # reported per tile below
            failures.append((plan.tiles[i], f"{type(exc).__name__}: {exc}"))

    if workers > 1 and getattr(detector, "concurrent_safe", False):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(len(plan.tiles))))
    else:
        for i in range(len(plan.tiles)):
            work(i)
    if failures:
        raise TileDetectionError(sorted(failures))

    boxes = []
    for tile_boxes in results:
        for b in tile_boxes or ():
            c = b.clamped(fw, fh)
            if c is not None:
                boxes.append(c)
    if merge_iou is None:
        return sorted(boxes, key=sort_key)
    return nms(boxes, merge_iou)


def detect_whole(frame: np.ndarray, detector: DetectorHandle) -> list[DetectionBox]:
    """Baseline: resize the full frame to the detector input and map boxes back."""
    fw, fh = _frame_dims(frame)
    nw, nh = detector.native_size
    small = resize_bilinear(frame, (nw, nh))
    sx, sy = fw / nw, fh / nh
    out = []
    for b in detector.detect(small):
        c = b.scaled(sx, sy).clamped(fw, fh)
        if c is not None:
            out.append(c)
    return sorted(out, key=sort_key)
