"""Square binary fiducial markers: 4x4 payload inside a one-cell black border.

A marker is 6x6 cells. Payload bit 1 is a white cell. Codes are read row by
row from the top-left cell. Corner coordinates use the continuous pixel
convention (pixel ``c`` spans ``[c, c + 1)``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..imaging.color import rgb_to_gray
from ..imaging.components import connected_components
from ..imaging.filters import box_sum
from ..imaging.transform import sample_bilinear
from .homography import CalibrationError, Homography, estimate_homography, project, fit_homography

# 16 payloads; any two rotations of distinct codes (and the non-trivial
# rotations of one code) differ in at least 6 bits.
CODEBOOK = (
    0x90D3, 0xB603, 0x576C, 0xFDFA, 0x2D0E, 0x7A21, 0x0CBA, 0xE560,
    0x71CB, 0xBCF5, 0x25F6, 0x0D81, 0x9515, 0x2837, 0x7473, 0x3598,
)
GRID = 6
MAX_BIT_ERRORS = 2


def code_bits(code: int) -> np.ndarray:
    return np.array([(code >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8).reshape(4, 4)


def marker_cells(marker_id: int) -> np.ndarray:
    """6x6 array of cell colours (1 = white) for ``marker_id``."""
    cells = np.zeros((GRID, GRID), dtype=np.uint8)
    cells[1:5, 1:5] = code_bits(CODEBOOK[marker_id])
    return cells


@dataclass(frozen=True)
class FiducialObservation:
    marker_id: int
    corners: tuple[tuple[float, float], ...]  # clockwise from the marker's top-left

    @property
    def center(self) -> tuple[float, float]:
        """Intersection of the diagonals."""
        p = np.asarray(self.corners)
        d1, d2 = p[2] - p[0], p[3] - p[1]
        a = np.array([d1, -d2]).T
        t = np.linalg.solve(a, p[1] - p[0])[0]
        c = p[0] + t * d1
        return float(c[0]), float(c[1])

    def to_json(self) -> dict:
        return {"id": self.marker_id, "corners": [[round(x, 4), round(y, 4)] for x, y in self.corners]}


def _signed_area(q: np.ndarray) -> float:
    x, y = q[:, 0], q[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def is_strictly_convex(q: np.ndarray) -> bool:
    q = np.asarray(q, dtype=np.float64)
    crosses = []
    for i in range(4):
        a, b, c = q[i], q[(i + 1) % 4], q[(i + 2) % 4]
        crosses.append((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    crosses = np.array(crosses)
    return bool(np.all(crosses > 0) or np.all(crosses < 0))


def _quad_from_points(pts: np.ndarray) -> np.ndarray | None:
    try:
        hull = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError):
        return None
    c = hull.mean(axis=0)
    p0 = hull[np.argmax(((hull - c) ** 2).sum(1))]
    p1 = hull[np.argmax(((hull - p0) ** 2).sum(1))]
    d = p1 - p0
    side = d[0] * (hull[:, 1] - p0[1]) - d[1] * (hull[:, 0] - p0[0])
    if side.max() <= 0 or side.min() >= 0:
        return None
    p2 = hull[np.argmax(side)]
    p3 = hull[np.argmin(side)]
    quad = np.array([p0, p2, p1, p3], dtype=np.float64)
    if _signed_area(quad) < 0:
        quad = quad[::-1]
    hull_area = ConvexHull(pts).volume
    if abs(_signed_area(quad)) < 0.9 * hull_area:
        return None
    return quad


def _refine_side(gray: np.ndarray, p: np.ndarray, q: np.ndarray, dark: float, light: float) -> np.ndarray | None:
    """Sub-pixel points on the dark/light transition along side p -> q."""
    d = q - p
    length = float(np.hypot(*d))
    if length < 4:
        return None
    t_dir = d / length
    # Outward normal for a clockwise (y-down) quad.
    normal = np.array([t_dir[1], -t_dir[0]])
    mid = 0.5 * (dark + light)
    ts = np.linspace(0.15, 0.85, max(5, int(length * 0.7)))
    offs = np.arange(-3.0, 3.0001, 0.25)
    base = p[None, :] + ts[:, None] * d[None, :]
    xs = base[:, 0:1] + offs[None, :] * normal[0]
    ys = base[:, 1:2] + offs[None, :] * normal[1]
    prof = sample_bilinear(gray, xs, ys)
    out = []
    for k in range(len(ts)):
        v = prof[k]
        cross = np.nonzero((v[:-1] < mid) & (v[1:] >= mid))[0]
        if len(cross) == 0:
            continue
        j = cross[np.argmin(np.abs(offs[cross]))]
        f = (mid - v[j]) / (v[j + 1] - v[j])
        s = offs[j] + f * (offs[j + 1] - offs[j])
        out.append(base[k] + s * normal)
    return np.array(out) if len(out) >= 3 else None


def _fit_line(pts: np.ndarray):
    c = pts.mean(axis=0)
    _, _, vh = np.linalg.svd(pts - c)
    n = vh[1]
    return n, float(n @ c)


def _intersect(l1, l2) -> np.ndarray | None:
    a = np.array([l1[0], l2[0]])
    if abs(np.linalg.det(a)) < 1e-9:
        return None
    return np.linalg.solve(a, np.array([l1[1], l2[1]]))


def _refine_quad(gray: np.ndarray, quad: np.ndarray, dark: float, light: float) -> np.ndarray:
    lines = []
    for i in range(4):
        pts = _refine_side(gray, quad[i], quad[(i + 1) % 4], dark, light)
        if pts is None:
            return quad
        lines.append(_fit_line(pts))
    refined = []
    for i in range(4):
        c = _intersect(lines[i - 1], lines[i])
        if c is None or np.hypot(*(c - quad[i])) > 3.0:
            return quad
        refined.append(c)
    return np.array(refined)


def _sample_cells(gray: np.ndarray, quad: np.ndarray) -> np.ndarray:
    canon = np.array([[0, 0], [GRID, 0], [GRID, GRID], [0, GRID]], dtype=np.float64)
    h = fit_homography(canon, quad)
    sub = np.array([0.3, 0.5, 0.7])
    cells = np.zeros((GRID, GRID))
    for i in range(GRID):
        for j in range(GRID):
            gx, gy = np.meshgrid(j + sub, i + sub)
            pts = project(h, np.column_stack([gx.ravel(), gy.ravel()]))
            cells[i, j] = sample_bilinear(gray, pts[:, 0], pts[:, 1]).mean()
    return cells


def decode_cells(cells: np.ndarray) -> tuple[int, int] | None:
    """Match sampled 6x6 cell intensities against the codebook.

    Returns ``(marker_id, k)`` where the observed payload equals the canonical
    one rotated ``k`` quarter turns counter-clockwise, or None.
    """
    lo, hi = np.percentile(cells, 5), np.percentile(cells, 95)
    if hi - lo < 30:
        return None
    bits = (cells > 0.5 * (lo + hi)).astype(np.uint8)
    border = np.concatenate([bits[0], bits[-1], bits[1:-1, 0], bits[1:-1, -1]])
    if border.sum() > 1:
        return None
    payload = bits[1:5, 1:5]
    best = None
    for mid, code in enumerate(CODEBOOK):
        ref = code_bits(code)
        for k in range(4):
            dist = int((np.rot90(ref, k) != payload).sum())
            if best is None or dist < best[0]:
                best = (dist, mid, k)
    if best[0] > MAX_BIT_ERRORS:
        return None
    return best[1], best[2]


def detect_fiducials(
    frame: np.ndarray,
    dictionary_size: int = 16,
    min_area: int = 40,
    threshold_offset: float = 7.0,
) -> list[FiducialObservation]:
    """Find and decode markers; results are sorted by marker id then position."""
    if not 1 <= dictionary_size <= len(CODEBOOK):
        raise ValueError(f"dictionary_size must be in 1..{len(CODEBOOK)}")
    gray_u8 = rgb_to_gray(frame)
    gray = gray_u8.astype(np.float64)
    h, w = gray.shape
    radius = max(3, min(h, w) // 12)
    local_mean = box_sum(gray_u8, radius) / (2 * radius + 1) ** 2
    dark = gray < local_mean - threshold_offset
    lmap = connected_components(dark, 8)
    found: list[FiducialObservation] = []
    areas = lmap.areas()
    for lab in range(1, lmap.count + 1):
        if areas[lab] < min_area:
            continue
        ys, xs = np.nonzero(lmap.labels == lab)
        if xs.min() == 0 or ys.min() == 0 or xs.max() == w - 1 or ys.max() == h - 1:
            continue
        # Pixel corners, so the hull hugs the dark region's outer boundary.
        pts = np.concatenate(
            [np.column_stack([xs + dx, ys + dy]) for dx in (-0.5, 0.5) for dy in (-0.5, 0.5)]
        ).astype(np.float64)
        quad = _quad_from_points(pts)
        if quad is None or not is_strictly_convex(quad):
            continue
        if min(np.hypot(*(quad[i] - quad[(i + 1) % 4])) for i in range(4)) < 2 * GRID:
            continue
        dark_level = float(np.percentile(gray[ys, xs], 50))
        light_level = float(np.percentile(sample_bilinear(gray, *_ring(quad, 1.5)), 75))
        if light_level - dark_level < 30:
            continue
        quad = _refine_quad(gray, quad, dark_level, light_level)
        decoded = decode_cells(_sample_cells(gray, quad))
        if decoded is None:
            continue
        mid, k = decoded
        if mid >= dictionary_size:
            continue
        start = (-k) % 4
        ordered = [quad[(start + i) % 4] + 0.5 for i in range(4)]
        found.append(FiducialObservation(mid, tuple((float(x), float(y)) for x, y in ordered)))
    found.sort(key=lambda o: (o.marker_id, o.corners[0]))
    return found


def _ring(quad: np.ndarray, offset: float) -> tuple[np.ndarray, np.ndarray]:
    """Points just outside each side of a clockwise quad."""
    xs, ys = [], []
    for i in range(4):
        p, q = quad[i], quad[(i + 1) % 4]
        d = q - p
        n = np.array([d[1], -d[0]]) / max(np.hypot(*d), 1e-9)
        for t in np.linspace(0.2, 0.8, 7):
            pt = p + t * d + offset * n
            xs.append(pt[0])
            ys.append(pt[1])
    return np.array(xs), np.array(ys)


@dataclass(frozen=True)
class MarkerWorld:
    """Floor placement of a marker.

    With ``size`` the marker lies flat on the floor and its four corners are
    used (canonical top-left at ``(-size/2, -size/2)`` before rotation by
    ``yaw``). Without it, only the marker centre is used.
    """

    x: float
    y: float
    size: float | None = None
    yaw: float = 0.0

    def corners(self) -> np.ndarray:
        s = self.size / 2.0
        local = np.array([[-s, -s], [s, -s], [s, s], [-s, s]])
        c, sn = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -sn], [sn, c]])
        return local @ rot.T + np.array([self.x, self.y])


def load_marker_world(source: dict | str | Path) -> dict[int, MarkerWorld]:
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    out = {}
    for key, v in data.items():
        out[int(key)] = MarkerWorld(float(v["x"]), float(v["y"]), v.get("size"), float(v.get("yaw", 0.0)))
    return out


def correspondences(observations, marker_world: dict[int, MarkerWorld]) -> tuple[np.ndarray, np.ndarray]:
    img, world = [], []
    for obs in observations:
        mw = marker_world.get(obs.marker_id)
        if mw is None:
            continue
        if mw.size:
            img.extend(obs.corners)
            world.extend(mw.corners().tolist())
        else:
            img.append(obs.center)
            world.append((mw.x, mw.y))
    return np.array(img, dtype=np.float64).reshape(-1, 2), np.array(world, dtype=np.float64).reshape(-1, 2)


def calibrate(observations, marker_world) -> Homography:
    """Image -> floor homography from observed markers with known floor placement."""
    if not isinstance(next(iter(marker_world.values()), None), MarkerWorld):
        marker_world = load_marker_world(marker_world)
    img, world = correspondences(observations, marker_world)
    if len(img) < 4:
        raise CalibrationError(f"need at least 4 correspondences, got {len(img)}")
    return estimate_homography(img, world)
