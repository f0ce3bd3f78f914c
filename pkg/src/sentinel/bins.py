"""Bin fullness from a single frame.

The rim of an open cylindrical bin is found as an ellipse in the blurred
saturation plane. A bin is declared Full when its interior is inhomogeneous
or when too little of the far rim edge is visible (litter sticking out
over the rim hides it).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .imaging.color import saturation
from .imaging.edges import canny
from .imaging.ellipse import Ellipse, interior_mask, perimeter_pixels
from .imaging.filters import dilate, erode, gaussian_blur
from .imaging.hough import hough_ellipse


class BinState(str, Enum):
    FULL = "Full"
    EMPTY = "Empty"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class BinROI:
    x: int
    y: int
    w: int
    h: int

    def validate(self, shape: tuple[int, ...]) -> None:
        fh, fw = shape[:2]
        if self.x < 0 or self.y < 0 or self.x + self.w > fw or self.y + self.h > fh:
            raise ValueError(f"ROI {self} is outside the {fw}x{fh} frame")
        if self.w * self.h < 32 * 32:
            raise ValueError(f"ROI {self} is smaller than 32x32 px")

    def as_rect(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class OccupancyParams:
    interior_std_threshold: float = 38.0
    rim_visibility_fraction: float = 0.6
    canny_low: float = 40.0
    canny_high: float = 120.0
    blur_sigma: float = 1.4
    min_rim_score: float = 0.5
    # ROIs are drawn tight around the opening, so the rim's major axis spans
    # most of the ROI; smaller ellipses are usually clutter inside the bin.
    min_major_fraction: float = 0.6
    rim_arc: str = "upper"
    std_on_blurred: bool = True
    interior_erosion: int = 2
    hough_iterations: int = 800
    seed: int = 0

    def __post_init__(self):
        if self.canny_low > self.canny_high:
            raise ValueError("canny_low must not exceed canny_high")
        if not 0 < self.rim_visibility_fraction < 1:
            raise ValueError("rim_visibility_fraction must be in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "OccupancyParams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class OccupancyVerdict:
    state: BinState
    interior_std: float
    rim_fraction: float
    ellipse: Ellipse | None
    rim_score: float = 0.0

    def to_json(self) -> dict:
        return {
            "state": self.state.value,
            "interior_std": round(self.interior_std, 3),
            "rim_fraction": round(self.rim_fraction, 4),
            "ellipse": None if self.ellipse is None else {k: round(v, 3) for k, v in self.ellipse.as_dict().items()},
        }


@dataclass
class _Planes:
    s_raw: np.ndarray
    s_blur: np.ndarray
    edges: np.ndarray


def _planes(frame: np.ndarray, params: OccupancyParams) -> _Planes:
    s = saturation(frame)
    s_blur = gaussian_blur(s, params.blur_sigma)
    return _Planes(s, s_blur, canny(s_blur, params.canny_low, params.canny_high))


def _find_rim(planes: _Planes, roi: BinROI, params: OccupancyParams) -> tuple[Ellipse, float] | None:
    amin = max(3.0, 0.1 * min(roi.w, roi.h))
    amax = float(max(roi.w, roi.h))
    major_min = params.min_major_fraction * max(roi.w, roi.h) / 2
    cands = hough_ellipse(
        planes.edges, roi.as_rect(), (amin, amax), top_k=10, n_iter=params.hough_iterations, seed=params.seed
    )
    best = None
    for e, score in cands:
        inside = roi.x <= e.cx < roi.x + roi.w and roi.y <= e.cy < roi.y + roi.h
        if not (inside and e.a >= major_min and score >= params.min_rim_score):
            continue
        # Rank by supported perimeter length: clutter makes small, well-scored
        # ellipses, while the rim is the largest one with decent support.
        support = score * e.perimeter()
        if best is None or support > best[2]:
            best = (e, score, support)
    return None if best is None else best[:2]


def detect_rim(frame: np.ndarray, roi: BinROI, params: OccupancyParams = OccupancyParams()) -> Ellipse | None:
    """Rim ellipse inside ``roi``: HSV -> S -> blur -> Canny -> Hough."""
    roi.validate(frame.shape)
    found = _find_rim(_planes(frame, params), roi, params)
    return None if found is None else found[0]


def interior_pixels(ellipse: Ellipse, shape: tuple[int, int], erosion: int = 2) -> np.ndarray:
    return erode(interior_mask(ellipse, shape), erosion)


def interior_heterogeneity(
    frame: np.ndarray, ellipse: Ellipse, params: OccupancyParams = OccupancyParams(), s_plane: np.ndarray | None = None
) -> float:
    """Population std of S over the eroded ellipse interior."""
    if s_plane is None:
        s_plane = saturation(frame)
        if params.std_on_blurred:
            s_plane = gaussian_blur(s_plane, params.blur_sigma)
    mask = interior_pixels(ellipse, s_plane.shape, params.interior_erosion)
    if not mask.any():
        raise ValueError("ellipse interior is empty after erosion")
    return float(np.std(s_plane[mask].astype(np.float64)))


def rim_occlusion(edges: np.ndarray, ellipse: Ellipse, arc: str = "upper") -> float:
    """Visible fraction of the rim arc: edge pixels in the 1-px-dilated arc
    over the number of pixels the arc should have, clamped to [0, 1]."""
    edges = np.asarray(edges, dtype=bool)
    pts = perimeter_pixels(ellipse, edges.shape, arc)
    if len(pts) == 0:
        return 0.0
    band = np.zeros(edges.shape, dtype=bool)
    band[pts[:, 1], pts[:, 0]] = True
    band = dilate(band, 1)
    visible = int((edges & band).sum())
    return min(1.0, visible / len(pts))


def _verdict(planes: _Planes, roi: BinROI, params: OccupancyParams) -> OccupancyVerdict:
    found = _find_rim(planes, roi, params)
    if found is None:
        return OccupancyVerdict(BinState.UNKNOWN, 0.0, 0.0, None)
    e, score = found
    s_plane = planes.s_blur if params.std_on_blurred else planes.s_raw
    try:
        std = interior_heterogeneity(None, e, params, s_plane=s_plane)
    except ValueError:
        return OccupancyVerdict(BinState.UNKNOWN, 0.0, 0.0, None)
    frac = rim_occlusion(planes.edges, e, params.rim_arc)
    full = std > params.interior_std_threshold or frac < params.rim_visibility_fraction
    return OccupancyVerdict(BinState.FULL if full else BinState.EMPTY, std, frac, e, score)


def classify(frame: np.ndarray, roi: BinROI, params: OccupancyParams = OccupancyParams()) -> OccupancyVerdict:
    roi.validate(frame.shape)
    return _verdict(_planes(frame, params), roi, params)


def classify_frame(
    frame: np.ndarray, rois: dict[str, BinROI], params: OccupancyParams = OccupancyParams()
) -> dict[str, OccupancyVerdict]:
    """Classify several bins, sharing the per-frame S/edge planes."""
    for roi in rois.values():
        roi.validate(frame.shape)
    planes = _planes(frame, params)
    return {bin_id: _verdict(planes, rois[bin_id], params) for bin_id in sorted(rois)}


def load_rois(source: dict | str | Path) -> dict[str, BinROI]:
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    return {str(k): BinROI(int(v["x"]), int(v["y"]), int(v["w"]), int(v["h"])) for k, v in data.items()}


def rois_to_json(rois: dict[str, BinROI]) -> dict:
    return {k: asdict(v) for k, v in rois.items()}


def expected_rim_pixels(ellipse: Ellipse, arc: str = "upper") -> int:
    """How many rim pixels an unobstructed bin should show."""
    return len(perimeter_pixels(ellipse, None, arc))


__all__ = [
    "BinROI",
    "BinState",
    "OccupancyParams",
    "OccupancyVerdict",
    "classify",
    "classify_frame",
    "detect_rim",
    "expected_rim_pixels",
    "interior_heterogeneity",
    "load_rois",
    "rim_occlusion",
]

