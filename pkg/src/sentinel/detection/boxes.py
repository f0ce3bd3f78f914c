"""Detection boxes, IoU and greedy class-wise NMS."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable


@dataclass(frozen=True)
class DetectionBox:
    """Axis-aligned box ``(x, y, w, h)`` in frame pixels."""

    x: float
    y: float
    w: float
    h: float
    class_id: int = 0
    confidence: float = 1.0

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box needs positive size, got {self.w}x{self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2, self.y + self.h / 2

    def shifted(self, dx: float, dy: float) -> "DetectionBox":
        return replace(self, x=self.x + dx, y=self.y + dy)

    def scaled(self, sx: float, sy: float) -> "DetectionBox":
        return replace(self, x=self.x * sx, y=self.y * sy, w=self.w * sx, h=self.h * sy)

    def clamped(self, width: float, height: float) -> "DetectionBox | None":
        """Clip to the frame; None if nothing positive remains."""
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, width), min(self.y2, height)
        if x2 <= x1 or y2 <= y1:
            return None
        return replace(self, x=x1, y=y1, w=x2 - x1, h=y2 - y1)

    def to_json(self) -> dict:
        return {
            "x": round(self.x, 3),
            "y": round(self.y, 3),
            "w": round(self.w, 3),
            "h": round(self.h, 3),
            "class": self.class_id,
            "conf": round(self.confidence, 4),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DetectionBox":
        return cls(
            float(d["x"]),
            float(d["y"]),
            float(d["w"]),
            float(d["h"]),
            int(d.get("class", d.get("class_id", 0))),
            float(d.get("conf", d.get("confidence", 1.0))),
        )


def iou(a: DetectionBox, b: DetectionBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def sort_key(b: DetectionBox):
    return (-b.confidence, b.x, b.y, b.w, b.h, b.class_id)


def nms(boxes: Iterable[DetectionBox], iou_threshold: float) -> list[DetectionBox]:
    """Greedy per-class NMS; a box is dropped if IoU >= threshold with a kept one.

    Candidates are visited by descending confidence, then by coordinates, so
    the result does not depend on input order.
    """
    kept: list[DetectionBox] = []
    for box in sorted(boxes, key=sort_key):
        if all(k.class_id != box.class_id or iou(k, box) < iou_threshold for k in kept):
            kept.append(box)
    return kept
