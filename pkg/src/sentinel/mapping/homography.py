"""Image-to-floor homography: normalised DLT fit, point mapping, floor objects."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..detection.boxes import DetectionBox


class CalibrationError(ValueError):
    pass


class HorizonError(ValueError):
    """The image point lies on or beyond the horizon of the floor plane."""


def _hartley(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 and the mean distance to sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2) / d if d > 0 else 1.0
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def _check_spread(pts: np.ndarray, what: str) -> None:
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[1] / sv[0] < 1e-9:
        raise CalibrationError(f"{what} points are collinear")


def to_homogeneous(pts: np.ndarray) -> np.ndarray:
    return np.column_stack([pts, np.ones(len(pts))])


def fit_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares DLT mapping ``src`` to ``dst`` with Hartley normalisation.

    Returns a 3x3 matrix scaled so that ``H[2, 2] == 1``.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise CalibrationError("need matching (N, 2) point arrays")
    if len(src) < 4:
        raise CalibrationError(f"need at least 4 correspondences, got {len(src)}")
    _check_spread(src, "image")
    _check_spread(dst, "world")
    ts, td = _hartley(src), _hartley(dst)
    s = to_homogeneous(src) @ ts.T
    d = to_homogeneous(dst) @ td.T
    rows = []
    for (x, y, w), (u, v, t) in zip(s, d):
        rows.append([0, 0, 0, -t * x, -t * y, -t * w, v * x, v * y, v * w])
        rows.append([t * x, t * y, t * w, 0, 0, 0, -u * x, -u * y, -u * w])
    a = np.array(rows)
    _, sv, vh = np.linalg.svd(a)
    if sv[-2] < 1e-12 * sv[0]:
        raise CalibrationError("degenerate point configuration")
    hn = vh[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    if abs(h[2, 2]) < 1e-15:
        raise CalibrationError("homography cannot be normalised (H[2,2] = 0)")
    return h / h[2, 2]


def project(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a homography to ``(N, 2)`` points (no horizon check)."""
    p = to_homogeneous(np.asarray(pts, dtype=np.float64)) @ np.asarray(h).T
    return p[:, :2] / p[:, 2:3]


@dataclass
class Homography:
    """Image (continuous pixel coordinates) -> floor plane (metres).

    ``valid_sign`` is the sign of the homogeneous scale for points in front
    of the camera; points with the opposite sign lie beyond the horizon.
    """

    matrix: np.ndarray
    rms_px: float | None = None
    valid_sign: float = 1.0
    n_points: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        if abs(np.linalg.det(m)) < 1e-15:
            raise CalibrationError("homography is singular")
        self.matrix = m / m[2, 2]

    def image_to_floor(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        p = to_homogeneous(pts) @ self.matrix.T
        scale = np.abs(self.matrix).max() * (1.0 + np.abs(pts).max())
        if np.any(p[:, 2] * self.valid_sign <= 1e-12 * scale):
            raise HorizonError("point maps to the horizon or beyond")
        return p[:, :2] / p[:, 2:3]

    def floor_to_image(self, pts) -> np.ndarray:
        return project(np.linalg.inv(self.matrix), np.atleast_2d(pts))

    def to_json(self) -> dict:
        return {
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "rms_px": None if self.rms_px is None else float(self.rms_px),
            "valid_sign": self.valid_sign,
            "n_points": self.n_points,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Homography":
        return cls(np.array(d["matrix"], dtype=np.float64), d.get("rms_px"), float(d.get("valid_sign", 1.0)), int(d.get("n_points", 0)))

    @classmethod
    def load(cls, path: str | Path) -> "Homography":
        return cls.from_json(json.loads(Path(path).read_text()))


def estimate_homography(image_pts, floor_pts) -> Homography:
    """Fit image -> floor and report the RMS reprojection error in pixels."""
    image_pts = np.asarray(image_pts, dtype=np.float64)
    floor_pts = np.asarray(floor_pts, dtype=np.float64)
    h = fit_homography(image_pts, floor_pts)
    w = to_homogeneous(image_pts) @ h[2]
    sign = 1.0 if np.median(w) > 0 else -1.0
    back = project(np.linalg.inv(h), floor_pts)
    rms = float(np.sqrt(((back - image_pts) ** 2).sum(axis=1).mean()))
    return Homography(h, rms, sign, len(image_pts))


@dataclass(frozen=True)
class MappedObject:
    object_id: int | None
    floor_xy: tuple[float, float]
    frame_index: int
    box: DetectionBox | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        d = {
            "object_id": self.object_id,
            "frame": self.frame_index,
            "x": round(self.floor_xy[0], 4),
            "y": round(self.floor_xy[1], 4),
        }
        if self.box is not None:
            d["box"] = self.box.to_json()
        return d


def ground_contact(box: DetectionBox) -> tuple[float, float]:
    """Bottom-centre of a box: where an upright object touches the floor."""
    return box.x + box.w / 2.0, box.y + box.h


def map_to_floor(h: Homography, box: DetectionBox, frame_index: int = 0, object_id: int | None = None) -> MappedObject:
    (x, y), = h.image_to_floor(ground_contact(box))
    if not (math.isfinite(x) and math.isfinite(y)):
        raise HorizonError("mapped position is not finite")
    return MappedObject(object_id, (float(x), float(y)), frame_index, box)


def distance_cm(a: MappedObject, b: MappedObject) -> int:
    """Floor-plane distance in whole centimetres (half rounds up)."""
    d = math.hypot(a.floor_xy[0] - b.floor_xy[0], a.floor_xy[1] - b.floor_xy[1])
    return int(math.floor(d * 100.0 + 0.5))


def relative_to(obj: MappedObject, origin_xy: tuple[float, float]) -> tuple[float, float]:
    """Offset of a mapped object from a reference point such as a marker cube."""
    return obj.floor_xy[0] - origin_xy[0], obj.floor_xy[1] - origin_xy[1]
