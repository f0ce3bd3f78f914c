"""Overlapping tile layout for sliced inference."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TilePlan:
    frame_size: tuple[int, int]
    tile_size: int
    overlap: int
    tiles: tuple[tuple[int, int, int, int], ...]  # (x0, y0, w, h)

    def __len__(self) -> int:
        return len(self.tiles)


def tiles_per_axis(dim: int, tile_size: int, overlap: int) -> int:
    if dim <= tile_size:
        return 1
    stride = tile_size - overlap
    return math.ceil((dim - tile_size) / stride) + 1


def _axis_starts(dim: int, tile_size: int, overlap: int) -> list[int]:
    n = tiles_per_axis(dim, tile_size, overlap)
    if n == 1:
        return [0]
    stride = tile_size - overlap
    starts = [i * stride for i in range(n - 1)]
    starts.append(dim - tile_size)
    return starts


def plan_tiles(frame_w: int, frame_h: int, tile_size: int = 640, overlap: int = 128) -> TilePlan:
    """Cover a frame with square tiles at stride ``tile_size - overlap``.

    The last tile on each axis is shifted back to end flush with the border.
    Along an axis shorter than ``tile_size`` a single tile spans the frame.
    """
    if frame_w < 1 or frame_h < 1:
        raise ValueError("frame dimensions must be positive")
    if not 0 <= overlap < tile_size:
        raise ValueError(f"need 0 <= overlap < tile_size, got overlap={overlap}, tile={tile_size}")
    if tile_size > max(frame_w, frame_h):
        raise ValueError(f"tile {tile_size} larger than frame {frame_w}x{frame_h}")
    xs = _axis_starts(frame_w, tile_size, overlap)
    ys = _axis_starts(frame_h, tile_size, overlap)
    tw, th = min(tile_size, frame_w), min(tile_size, frame_h)
    tiles = tuple((x, y, tw, th) for y in ys for x in xs)
    return TilePlan((frame_w, frame_h), tile_size, overlap, tiles)
