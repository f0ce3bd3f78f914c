"""Video-surveillance coverage analysis on a probe grid.

World frame: metres, y up, floor plane at ``y = scene.floor``. A camera's yaw
rotates about +y starting from +x towards +z; negative pitch looks down.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_EPS = 1e-9


@dataclass(frozen=True)
class Box3:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if any(hi < lo for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"box max {self.max} below min {self.min}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed containment test for an ``(N, 3)`` array."""
        lo, hi = np.asarray(self.min), np.asarray(self.max)
        return np.all((points >= lo - _EPS) & (points <= hi + _EPS), axis=-1)

    def to_json(self) -> dict:
        return {"min": list(self.min), "max": list(self.max)}

    @classmethod
    def from_json(cls, d: dict) -> "Box3":
        return cls(tuple(float(v) for v in d["min"]), tuple(float(v) for v in d["max"]))


@dataclass(frozen=True)
class Scene:
    bounds: Box3
    occluders: tuple[Box3, ...] = ()
    floor: float = 0.0

    def __post_init__(self):
        lo, hi = self.bounds.min, self.bounds.max
        if hi[0] <= lo[0] or hi[2] <= lo[2]:
            raise ValueError(f"degenerate scene bounds {self.bounds}")
        for occ in self.occluders:
            if not (self.bounds.contains(np.array([occ.min, occ.max]))).all():
                raise ValueError(f"occluder {occ} extends outside the scene bounds")

    @classmethod
    def from_json(cls, d: dict) -> "Scene":
        return cls(
            Box3.from_json(d["bounds"]),
            tuple(Box3.from_json(o) for o in d.get("occluders", [])),
            float(d.get("floor", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        return {
            "bounds": self.bounds.to_json(),
            "occluders": [o.to_json() for o in self.occluders],
            "floor": self.floor,
        }


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    yaw: float
    pitch: float
    hfov: float
    vfov: float
    max_range: float = 50.0

    def __post_init__(self):
        if not (0 < self.hfov < math.pi and 0 < self.vfov < math.pi):
            raise ValueError("fields of view must lie in (0, pi)")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unit forward, right and up vectors in world coordinates."""
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        forward = np.array([cp * cy, sp, cp * sy])
        right = np.array([-sy, 0.0, cy])
        up = np.cross(right, forward)
        return forward, right, up

    @classmethod
    def from_json(cls, d: dict) -> "CameraPose":
        return cls(
            tuple(float(v) for v in d["position"]),
            float(d["yaw"]),
            float(d["pitch"]),
            float(d["hfov"]),
            float(d["vfov"]),
            float(d.get("max_range", 50.0)),
        )

    def to_json(self) -> dict:
        return {
            "position": list(self.position),
            "yaw": self.yaw,
            "pitch": self.pitch,
            "hfov": self.hfov,
            "vfov": self.vfov,
            "max_range": self.max_range,
        }


def load_cameras(path: str | Path) -> list[CameraPose]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("cameras", [])
    return [CameraPose.from_json(c) for c in data]


@dataclass
class ProbeGrid:
    spacing: float
    points: np.ndarray  # (N, 3)
    weights: np.ndarray | None = None

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.points))

    def __len__(self) -> int:
        return len(self.points)


def generate_probes(scene: Scene, spacing: float = 1.0, probe_height: float = 0.1) -> ProbeGrid:
    """Lattice of probes over the floor, starting at the bounds' min corner.

    Probes inside (or on) an occluder are dropped. Ordering is by x, then z.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    lo, hi = scene.bounds.min, scene.bounds.max
    nx = int(math.floor((hi[0] - lo[0]) / spacing + 1e-9)) + 1
    nz = int(math.floor((hi[2] - lo[2]) / spacing + 1e-9)) + 1
    xs = lo[0] + spacing * np.arange(nx)
    zs = lo[2] + spacing * np.arange(nz)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    y = scene.floor + probe_height
    pts = np.column_stack([gx.ravel(), np.full(gx.size, y), gz.ravel()])
    keep = np.ones(len(pts), dtype=bool)
    for occ in scene.occluders:
        keep &= ~occ.contains(pts)
    return ProbeGrid(spacing, pts[keep])


def segment_hits_box(origin: np.ndarray, targets: np.ndarray, box: Box3) -> np.ndarray:
    """Slab test: does the open segment origin -> target cross the box interior?

    Grazing contact (zero-length overlap) is not a hit.
    """
    d = targets - origin
    tnear = np.zeros(len(targets))
    tfar = np.ones(len(targets))
    for axis in range(3):
        lo, hi = box.min[axis], box.max[axis]
        o = origin[axis]
        da = d[:, axis]
        parallel = np.abs(da) < 1e-15
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / da
            t2 = (hi - o) / da
        tmin = np.where(parallel, -np.inf, np.minimum(t1, t2))
        tmax = np.where(parallel, np.inf, np.maximum(t1, t2))
        if not lo < o < hi:
            # Parallel rays outside the open slab never enter it.
            tmax = np.where(parallel, -np.inf, tmax)
        tnear = np.maximum(tnear, tmin)
        tfar = np.minimum(tfar, tmax)
    return tnear < tfar - 1e-12


def visible_mask(camera: CameraPose, points: np.ndarray, scene: Scene) -> np.ndarray:
    """Vectorised :func:`visible` over an ``(N, 3)`` array of points."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c = np.asarray(camera.position, dtype=np.float64)
    f, r, u = camera.basis()
    v = points - c
    zf = v @ f
    with np.errstate(divide="ignore", invalid="ignore"):
        h_ang = np.arctan2(v @ r, zf)
        v_ang = np.arctan2(v @ u, zf)
    ok = (zf > 0) & (np.abs(h_ang) <= camera.hfov / 2 + 1e-12) & (np.abs(v_ang) <= camera.vfov / 2 + 1e-12)
    ok &= np.linalg.norm(v, axis=1) <= camera.max_range
    for occ in scene.occluders:
        idx = np.nonzero(ok)[0]
        if len(idx) == 0:
            break
        ok[idx[segment_hits_box(c, points[idx], occ)]] = False
    return ok


def visible(camera: CameraPose, probe, scene: Scene) -> bool:
    """Frustum, range and line-of-sight test for a single point."""
    return bool(visible_mask(camera, np.asarray(probe, dtype=np.float64)[None, :], scene)[0])


@dataclass
class CoverageReport:
    per_camera: list[frozenset[int]]
    covered: list[int]
    blind: list[int]
    coverage_ratio: float

    def to_json(self) -> dict:
        return {
            "coverage_ratio": round(self.coverage_ratio, 6),
            "n_probes": len(self.covered) + len(self.blind),
            "covered": len(self.covered),
            "blind": self.blind,
            "per_camera": [sorted(s) for s in self.per_camera],
        }


def coverage(cameras: list[CameraPose], grid: ProbeGrid, scene: Scene) -> CoverageReport:
    n = len(grid)
    seen = np.zeros(n, dtype=bool)
    per_camera = []
    for cam in cameras:
        vis = visible_mask(cam, grid.points, scene) if n else np.zeros(0, dtype=bool)
        per_camera.append(frozenset(np.nonzero(vis)[0].tolist()))
        seen |= vis
    covered = np.nonzero(seen)[0].tolist()
    blind = np.nonzero(~seen)[0].tolist()
    ratio = len(covered) / n if n else 0.0
    return CoverageReport(per_camera, covered, blind, ratio)


@dataclass
class PlacementResult:
    indices: list[int]
    cameras: list[CameraPose]
    coverage_ratio: float
    shortfall: bool
    target_ratio: float = 1.0
    gains: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "selected": self.indices,
            "cameras": [c.to_json() for c in self.cameras],
            "coverage_ratio": round(self.coverage_ratio, 6),
            "target_ratio": self.target_ratio,
            "shortfall": self.shortfall,
        }


def greedy_cover(
    sets: list[np.ndarray], weights: np.ndarray, target_ratio: float
) -> tuple[list[int], float, list[float]]:
    """Greedy weighted set cover over boolean membership rows."""
    total = float(weights.sum())
    covered = np.zeros(len(weights), dtype=bool)
    chosen: list[int] = []
    gains: list[float] = []
    ratio = 0.0
    while total > 0 and ratio < target_ratio - 1e-12:
        best, best_gain = -1, 0.0
        for i, s in enumerate(sets):
            if i in chosen:
                continue
            gain = float(weights[s & ~covered].sum())
            if gain > best_gain + 1e-12:
                best, best_gain = i, gain
        if best < 0:
            break
        chosen.append(best)
        gains.append(best_gain)
        covered |= sets[best]
        ratio = float(weights[covered].sum()) / total
    return chosen, ratio, gains


def suggest_placement(
    scene: Scene,
    grid: ProbeGrid,
    candidates: list[CameraPose],
    target_ratio: float = 1.0,
    weights: np.ndarray | None = None,
) -> PlacementResult:
    """Pick cameras greedily until ``target_ratio`` of the probes is covered.

    Each step takes the candidate seeing the most (weighted) still-blind
    probes, lowest index on ties. If no candidate adds coverage before the
    target is met, the partial selection is returned with ``shortfall=True``.
    """
    if not 0 < target_ratio <= 1:
        raise ValueError("target_ratio must be in (0, 1]")
    if weights is None:
        weights = grid.weights if grid.weights is not None else np.ones(len(grid))
    weights = np.asarray(weights, dtype=np.float64)
    sets = [visible_mask(c, grid.points, scene) for c in candidates]
    chosen, ratio, gains = greedy_cover(sets, weights, target_ratio)
    return PlacementResult(
        chosen,
        [candidates[i] for i in chosen],
        ratio,
        ratio < target_ratio - 1e-12,
        target_ratio,
        gains,
    )
