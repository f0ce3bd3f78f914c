"""Track history on the floor plane and top-view traffic rasters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .homography import MappedObject


@dataclass
class TrackHistory:
    """Per-track ordered ``(frame_index, (x, y))`` samples."""

    tracks: dict[int, list[tuple[int, tuple[float, float]]]] = field(default_factory=dict)
    next_id: int = 0
    # Track id given to each object of the most recent update, in input order.
    last_assignment: list[int] = field(default_factory=list)

    def copy(self) -> "TrackHistory":
        return TrackHistory({k: list(v) for k, v in self.tracks.items()}, self.next_id)

    def last_positions(self) -> dict[int, tuple[int, tuple[float, float]]]:
        return {k: v[-1] for k, v in self.tracks.items() if v}

    def to_records(self) -> list[dict]:
        return [
            {"track": tid, "frame": f, "x": round(x, 4), "y": round(y, 4)}
            for tid in sorted(self.tracks)
            for f, (x, y) in self.tracks[tid]
        ]

    @classmethod
    def from_records(cls, records) -> "TrackHistory":
        hist = cls()
        for r in sorted(records, key=lambda r: (int(r["track"]), int(r["frame"]))):
            hist.tracks.setdefault(int(r["track"]), []).append((int(r["frame"]), (float(r["x"]), float(r["y"]))))
        hist.next_id = max(hist.tracks, default=-1) + 1
        return hist


def update_tracks(history: TrackHistory, mapped: list[MappedObject], max_assoc_dist: float = 1.0) -> TrackHistory:
    """Associate one frame of mapped objects with existing tracks.

    Pairs are taken greedily by increasing distance to each track's last
    position, gated by ``max_assoc_dist``. Unmatched objects open new
    tracks; unmatched tracks are left as they are. The input history is not
    modified; ``last_assignment`` on the result maps each object to its track.
    """
    out = history.copy()
    if not mapped:
        return out
    frames = {m.frame_index for m in mapped}
    if len(frames) != 1:
        raise ValueError("update_tracks expects objects from a single frame")
    frame = frames.pop()
    last = {k: v for k, v in out.last_positions().items() if v[0] < frame}
    pairs = []
    for tid, (_, (tx, ty)) in last.items():
        for j, m in enumerate(mapped):
            d = math.hypot(m.floor_xy[0] - tx, m.floor_xy[1] - ty)
            if d <= max_assoc_dist:
                pairs.append((d, tid, j))
    pairs.sort()
    assigned: dict[int, int] = {}
    used_tracks: set[int] = set()
    for _, tid, j in pairs:
        if j in assigned or tid in used_tracks:
            continue
        assigned[j] = tid
        used_tracks.add(tid)
    for j, m in enumerate(mapped):
        tid = assigned.get(j)
        if tid is None:
            tid = out.next_id
            out.next_id += 1
            out.tracks[tid] = []
        out.tracks[tid].append((frame, m.floor_xy))
        out.last_assignment.append(tid)
    return out


def labelled(history: TrackHistory, mapped: list[MappedObject]) -> list[MappedObject]:
    """Objects of the last update with their track ids filled in."""
    return [replace(m, object_id=t) for m, t in zip(mapped, history.last_assignment)]


@dataclass
class FloorMap:
    counts: np.ndarray  # (rows, cols); row 0 at min y
    origin: tuple[float, float]
    cell: float

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        col = int(math.floor((x - self.origin[0]) / self.cell))
        row = int(math.floor((y - self.origin[1]) / self.cell))
        if 0 <= row < self.counts.shape[0] and 0 <= col < self.counts.shape[1]:
            return row, col
        return None

    def to_image(self) -> np.ndarray:
        peak = self.counts.max()
        if peak == 0:
            return np.zeros(self.counts.shape, dtype=np.uint8)
        return np.rint(255.0 * self.counts / peak).astype(np.uint8)

    def hottest(self, n: int = 5) -> list[tuple[float, float, int]]:
        """Centres and counts of the ``n`` busiest cells."""
        flat = np.argsort(-self.counts, axis=None, kind="stable")[:n]
        out = []
        for idx in flat:
            r, c = np.unravel_index(idx, self.counts.shape)
            if self.counts[r, c] == 0:
                break
            cx = round(self.origin[0] + (c + 0.5) * self.cell, 6)
            cy = round(self.origin[1] + (r + 0.5) * self.cell, 6)
            out.append((cx, cy, int(self.counts[r, c])))
        return out


def to_floor_map(
    history: TrackHistory,
    scene_bounds: tuple[tuple[float, float], tuple[float, float]],
    cell: float = 0.1,
) -> FloorMap:
    """Per-cell visit counts over ``((xmin, ymin), (xmax, ymax))``."""
    (x0, y0), (x1, y1) = scene_bounds
    if cell <= 0 or x1 <= x0 or y1 <= y0:
        raise ValueError("invalid floor map geometry")
    cols = int(math.ceil((x1 - x0) / cell - 1e-9))
    rows = int(math.ceil((y1 - y0) / cell - 1e-9))
    fmap = FloorMap(np.zeros((rows, cols), dtype=np.int64), (x0, y0), cell)
    for samples in history.tracks.values():
        for _, (x, y) in samples:
            rc = fmap.cell_of(x, y)
            if rc is not None:
                fmap.counts[rc] += 1
    return fmap
