"""Water-stain segmentation with per-pixel temporal persistence.

Specular water lowers colour saturation. Each frame's lightness is
contrast-enhanced (CLAHE on CIELAB L*), pushed back into RGB, and pixels
with low HSV saturation are kept as stain candidates. A pixel stays part of
a stain until it has gone ``thr_history`` consecutive frames without being
segmented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imaging.color import rgb_to_hsv, rgb_to_lab_l
from .imaging.components import component_stats, connected_components, remove_small
from .imaging.filters import clahe, dilate, median_filter


@dataclass(frozen=True)
class StainParams:
    thr_S: int = 60
    thr_history: int = 15
    clahe_clip: float = 2.0
    clahe_grid: tuple[int, int] = (8, 8)
    dilate_radius: int = 1
    median_radius: int = 2
    min_blob_area: int = 64
    # False selects S > thr_S instead.
    select_low_saturation: bool = True

    def __post_init__(self):
        if self.thr_history < 1:
            raise ValueError("thr_history must be >= 1")
        if self.min_blob_area < 1:
            raise ValueError("min_blob_area must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "StainParams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "clahe_grid" in known:
            known["clahe_grid"] = tuple(known["clahe_grid"])
        return cls(**known)


def enhance_lightness(frame: np.ndarray, params: StainParams = StainParams()) -> np.ndarray:
    """CLAHE on L*, re-injected by scaling each RGB pixel with L_new / L_old."""
    lightness = rgb_to_lab_l(frame)
    h, w = lightness.shape
    grid = (min(params.clahe_grid[0], w), min(params.clahe_grid[1], h))
    enhanced = clahe(lightness, grid, params.clahe_clip)
    ratio = enhanced.astype(np.float64) / np.maximum(lightness.astype(np.float64), 1.0)
    out = frame.astype(np.float64) * ratio[..., None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def segment_frame(frame: np.ndarray, params: StainParams = StainParams()) -> np.ndarray:
    s = rgb_to_hsv(enhance_lightness(frame, params))[..., 1]
    mask = s < params.thr_S if params.select_low_saturation else s > params.thr_S
    if params.dilate_radius > 0:
        mask = dilate(mask, params.dilate_radius)
    if params.median_radius > 0:
        mask = median_filter(mask, params.median_radius)
    return remove_small(mask, params.min_blob_area, connectivity=8)


@dataclass
class StainState:
    """Temporal stain labels for one camera stream."""

    miss_count: np.ndarray
    active: np.ndarray
    onset: np.ndarray  # frame number at which each active pixel switched on
    frame_index: int = 0
    thr_history: int = 15

    @classmethod
    def empty(cls, shape: tuple[int, int], thr_history: int = 15) -> "StainState":
        return cls(
            miss_count=np.full(shape, thr_history, dtype=np.int32),
            active=np.zeros(shape, dtype=bool),
            onset=np.full(shape, -1, dtype=np.int64),
            frame_index=0,
            thr_history=thr_history,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.active.shape


def update_state(state: StainState, mask: np.ndarray, params: StainParams = StainParams()) -> StainState:
    """Advance the per-pixel automaton by one frame (returns a new state).

    Segmented pixels become active with a zero miss counter; others count a
    miss and drop out once the counter reaches ``thr_history``.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != state.shape:
        raise ValueError(f"mask shape {mask.shape} does not match state {state.shape}")
    thr = params.thr_history
    frame = state.frame_index + 1
    miss = np.where(mask, 0, np.minimum(state.miss_count + 1, thr)).astype(np.int32)
    active = mask | (state.active & (miss < thr))
    onset = np.where(active & ~state.active, frame, np.where(active, state.onset, -1))
    return StainState(miss, active, onset, frame, thr)


@dataclass(frozen=True)
class StainBlob:
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    age: int

    def to_json(self) -> dict:
        return {
            "area": self.area,
            "centroid": [round(self.centroid[0], 3), round(self.centroid[1], 3)],
            "bbox": list(self.bbox),
            "age": self.age,
        }


def stain_report(state: StainState) -> list[StainBlob]:
    """One record per connected active region; age is its oldest pixel's age in frames."""
    lmap = connected_components(state.active, 8)
    blobs = []
    for st in component_stats(lmap):
        first = state.onset[lmap.labels == st.label].min()
        blobs.append(StainBlob(st.area, st.centroid, st.bbox, int(state.frame_index - first + 1)))
    return blobs


@dataclass
class StainTracker:
    """Convenience wrapper: segment each incoming frame and update the state."""

    params: StainParams = field(default_factory=StainParams)
    state: StainState | None = None

    def push(self, frame: np.ndarray) -> tuple[np.ndarray, list[StainBlob]]:
        mask = segment_frame(frame, self.params)
        if self.state is None:
            self.state = StainState.empty(mask.shape, self.params.thr_history)
        self.state = update_state(self.state, mask, self.params)
        return mask, stain_report(self.state)
