"""Synthetic frames with exact ground truth.

Two families of generators live here:

* image-space views (single bin, puddle floor, scattered litter) used for
  calibration and tests, where the ground truth is drawn directly;
* a flat-shaded perspective renderer for :class:`SceneSpec` scenes, which
  projects floor items, bins, people and marker tiles through a pinhole
  camera and writes a :data:`GroundTruthManifest`-style JSON alongside.

Image-space views use pixel-index coordinates (pixel centre at integers);
boxes and projected points use continuous coordinates (pixel ``c`` spans
``[c, c + 1)``).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION
from .coverage import CameraPose
from .detection.boxes import DetectionBox
from .imaging.ellipse import Ellipse, interior_mask
from .imaging.io import write_image, write_mask
from .mapping.fiducials import marker_cells

log = logging.getLogger(__name__)

LITTER_CLASSES = [
    {"id": 0, "name": "litter_red", "color": [220, 30, 30]},
    {"id": 1, "name": "litter_blue", "color": [30, 60, 220]},
    {"id": 2, "name": "litter_yellow", "color": [230, 200, 20]},
]
PERSON_CLASS = {"id": 3, "name": "person", "color": [20, 150, 150]}


# ----------------------------------------------------------------------------
# raster helpers


def polygon_coverage(poly: np.ndarray, shape: tuple[int, int], supersample: int = 1):
    """Fraction of each pixel covered by a polygon given in continuous coords.

    Returns ``(y0, x0, coverage)`` for the polygon's bounding window, or None
    when the polygon misses the image.
    """
    h, w = shape
    poly = np.asarray(poly, dtype=np.float64)
    x0 = max(int(math.floor(poly[:, 0].min())), 0)
    x1 = min(int(math.ceil(poly[:, 0].max())) + 1, w)
    y0 = max(int(math.floor(poly[:, 1].min())), 0)
    y1 = min(int(math.ceil(poly[:, 1].max())) + 1, h)
    if x1 <= x0 or y1 <= y0:
        return None
    ss = supersample
    offs = (np.arange(ss) + 0.5) / ss
    px = (np.arange(x0, x1)[:, None] + offs[None, :]).ravel()
    py = (np.arange(y0, y1)[:, None] + offs[None, :]).ravel()
    gx, gy = np.meshgrid(px, py)
    inside = np.zeros(gx.shape, dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        # Crossing-number test on every sample point.
        cond = (yi > gy) != (yj > gy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = (xj - xi) * (gy - yi) / (yj - yi) + xi
        inside ^= cond & (gx < xcross)
        xj, yj = xi, yi
    cov = inside.reshape(y1 - y0, ss, x1 - x0, ss).mean(axis=(1, 3))
    return y0, x0, cov


def fill_polygon(canvas: np.ndarray, poly, color, supersample: int = 1, owner=None, owner_id: int = 0) -> np.ndarray:
    """Paint ``poly`` onto ``canvas`` in place; returns the >= 50 % coverage mask."""
    full = np.zeros(canvas.shape[:2], dtype=bool)
    res = polygon_coverage(np.asarray(poly), canvas.shape[:2], supersample)
    if res is None:
        return full
    y0, x0, cov = res
    hh, ww = cov.shape
    region = canvas[y0 : y0 + hh, x0 : x0 + ww].astype(np.float64)
    col = np.asarray(color, dtype=np.float64)
    blended = region * (1 - cov[..., None]) + col * cov[..., None]
    canvas[y0 : y0 + hh, x0 : x0 + ww] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    full[y0 : y0 + hh, x0 : x0 + ww] = cov >= 0.5
    if owner is not None:
        owner[full] = owner_id
    return full


def fill_mask(canvas: np.ndarray, mask: np.ndarray, color) -> None:
    canvas[mask] = np.asarray(color, dtype=np.uint8)


def add_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0:
        return img
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def ellipse_polygon(e: Ellipse, n: int = 96) -> np.ndarray:
    """Polygon of an index-coordinate ellipse, returned in continuous coordinates."""
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    x, y = e.point(t)
    return np.column_stack([x + 0.5, y + 0.5])


def convex_hull(points: np.ndarray) -> np.ndarray:
    pts = sorted(map(tuple, np.asarray(points, dtype=np.float64)))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)


def floor_texture(height: int, width: int, colors, tile: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    """Checkerboard of two colours with per-pixel Gaussian noise."""
    yy, xx = np.mgrid[0:height, 0:width]
    parity = ((xx // tile) + (yy // tile)) % 2
    c = np.asarray(colors, dtype=np.uint8)
    img = c[parity]
    return add_noise(img, noise, rng)


def draw_marker(canvas: np.ndarray, marker_id: int, corners, quiet: float = 1.0, supersample: int = 4) -> None:
    """Paint a fiducial whose outer border has image corners ``corners``
    (continuous coords, clockwise from the marker's top-left), surrounded by
    a white quiet zone ``quiet`` cells wide."""
    from .mapping.homography import fit_homography, project

    cells = marker_cells(marker_id)
    n = cells.shape[0]
    canon = np.array([[0, 0], [n, 0], [n, n], [0, n]], dtype=np.float64)
    h = fit_homography(canon, np.asarray(corners, dtype=np.float64))
    white = (245, 245, 245) if canvas.ndim == 3 else 245
    black = (15, 15, 15) if canvas.ndim == 3 else 15
    q = quiet
    fill_polygon(canvas, project(h, np.array([[-q, -q], [n + q, -q], [n + q, n + q], [-q, n + q]])), white, supersample)
    for i in range(n):
        for j in range(n):
            if not cells[i, j]:
                cell = np.array([[j, i], [j + 1, i], [j + 1, i + 1], [j, i + 1]], dtype=np.float64)
                fill_polygon(canvas, project(h, cell), black, supersample)


# ----------------------------------------------------------------------------
# bins


BIN_BODY = (40, 140, 60)
BIN_INTERIOR = (62, 60, 58)
BIN_FLOOR = ((184, 152, 112), (176, 146, 108))
OCCLUDER = (25, 35, 120)


@dataclass
class BinView:
    frame: np.ndarray
    roi: tuple[int, int, int, int]
    ellipse: Ellipse
    full: bool


def _clutter(canvas: np.ndarray, e: Ellipse, rng: np.random.Generator, protrude: float) -> None:
    """Litter inside the opening plus items sticking out over the far rim."""
    shape = canvas.shape[:2]
    inner = interior_mask(Ellipse(e.cx, e.cy, e.a * 0.85, e.b * 0.8, e.theta), shape)
    # Kept well away from the litter class colours.
    palette = [(235, 235, 230), (120, 200, 220), (200, 120, 170), (90, 60, 30), (250, 140, 20), (150, 60, 160)]
    for _ in range(int(rng.integers(8, 14))):
        t = rng.uniform(0, 2 * math.pi)
        r = math.sqrt(rng.uniform(0, 1)) * 0.7
        cx, cy = e.point(np.array([t]))
        px = e.cx + r * (cx[0] - e.cx)
        py = e.cy + r * (cy[0] - e.cy)
        item = Ellipse.normalized(px, py, rng.uniform(0.12, 0.3) * e.a, rng.uniform(0.1, 0.25) * e.b + 1, rng.uniform(0, math.pi))
        m = interior_mask(item, shape) & inner
        fill_mask(canvas, m, palette[int(rng.integers(len(palette)))])
    if protrude <= 0:
        return
    # Cover a stretch of the upper arc (t in (pi, 2 pi) has y < cy for small theta).
    span = protrude * math.pi
    start = math.pi + rng.uniform(0, math.pi - span)
    ts = np.linspace(start, start + span, 40)
    xs, ys = e.point(ts)
    poly = np.column_stack([xs, ys - rng.uniform(6, 12)])
    inner_xs, inner_ys = e.point(ts[::-1])
    poly = np.vstack([poly, np.column_stack([e.cx + 0.6 * (inner_xs - e.cx), e.cy + 0.6 * (inner_ys - e.cy)])])
    fill_polygon(canvas, poly + 0.5, palette[int(rng.integers(len(palette)))])


def _occlude_arc(canvas: np.ndarray, e: Ellipse, fraction: float, rng: np.random.Generator) -> None:
    if fraction <= 0:
        return
    start = rng.uniform(0, 2 * math.pi)
    ts = np.linspace(start, start + fraction * 2 * math.pi, 30)
    xs, ys = e.point(ts)
    outer = np.column_stack([e.cx + 1.15 * (xs - e.cx), e.cy + 1.25 * (ys - e.cy)])
    inner = np.column_stack([e.cx + 0.85 * (xs - e.cx), e.cy + 0.75 * (ys - e.cy)])[::-1]
    fill_polygon(canvas, np.vstack([outer, inner]) + 0.5, OCCLUDER)


def draw_bin(
    canvas: np.ndarray,
    rim: Ellipse,
    body: np.ndarray,
    full: bool,
    rng: np.random.Generator,
    occlusion: float = 0.0,
    protrude: float = 0.5,
) -> None:
    """Paint a bin: body polygon (continuous coords), dark opening, contents."""
    fill_polygon(canvas, body, BIN_BODY)
    fill_mask(canvas, interior_mask(rim, canvas.shape[:2]), BIN_INTERIOR)
    if full:
        _clutter(canvas, rim, rng, protrude)
    _occlude_arc(canvas, rim, occlusion, rng)


def rim_roi(e: Ellipse, shape: tuple[int, int], margin: int = 10) -> tuple[int, int, int, int]:
    """Axis-aligned ROI around a rim ellipse, clipped to the frame."""
    c, sn = math.cos(e.theta), math.sin(e.theta)
    hx = math.hypot(e.a * c, e.b * sn)
    hy = math.hypot(e.a * sn, e.b * c)
    h, w = shape
    x0 = max(int(math.floor(e.cx - hx)) - margin, 0)
    y0 = max(int(math.floor(e.cy - hy)) - margin, 0)
    x1 = min(int(math.ceil(e.cx + hx)) + margin + 1, w)
    y1 = min(int(math.ceil(e.cy + hy)) + margin + 1, h)
    return x0, y0, x1 - x0, y1 - y0


def render_bin_view(
    seed: int,
    full: bool,
    width: int = 320,
    height: int = 240,
    occlusion: float = 0.1,
    noise: float = 2.0,
) -> BinView:
    """One bin seen from an elevated camera, with randomised rim pose."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(45, 70)
    b = a * rng.uniform(0.35, 0.6)
    theta = rng.uniform(-0.15, 0.15) % math.pi
    cx = width / 2 + rng.uniform(-15, 15)
    cy = height * 0.38 + rng.uniform(-8, 8)
    rim = Ellipse.normalized(cx, cy, a, b, theta)
    depth = b * rng.uniform(1.4, 2.2)
    canvas = floor_texture(height, width, BIN_FLOOR, 48, 0.0, rng)
    top = ellipse_polygon(rim)
    body = convex_hull(np.vstack([top, top + np.array([0.0, depth])]))
    draw_bin(canvas, rim, body, full, rng, occlusion)
    canvas = add_noise(canvas, noise, rng)
    return BinView(canvas, rim_roi(rim, (height, width)), rim, full)


def render_ellipse_edges(seed: int, width: int = 256, height: int = 200) -> tuple[np.ndarray, Ellipse]:
    """Clean perimeter render of a random ellipse for Hough tests."""
    from .imaging.ellipse import perimeter_mask

    rng = np.random.default_rng(seed)
    a = rng.uniform(25, 60)
    b = a * rng.uniform(0.4, 0.85)
    e = Ellipse.normalized(
        rng.uniform(a + 10, width - a - 10),
        rng.uniform(a + 10, height - a - 10) if height > 2 * a + 20 else height / 2,
        a,
        b,
        rng.uniform(0, math.pi),
    )
    return perimeter_mask(e, (height, width)), e


# ----------------------------------------------------------------------------
# puddles


PUDDLE_FLOORS = (((200, 90, 60), (60, 120, 190)), ((180, 60, 140), (70, 170, 90)), ((210, 170, 40), (50, 90, 170)))
GLOSS = np.array([205.0, 205.0, 210.0])


def _puddle_polygon(rng, cx, cy, r):
    n = 40
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    radius = r * (1 + 0.25 * np.sin(3 * t + rng.uniform(0, 6)) + 0.1 * np.sin(5 * t + rng.uniform(0, 6)))
    stretch = rng.uniform(0.6, 1.0)
    return np.column_stack([cx + radius * np.cos(t), cy + stretch * radius * np.sin(t)])


def render_puddle_scene(seed: int, width: int = 320, height: int = 240, noise: float = 3.0):
    """Saturated tiled floor with one to three desaturated glossy puddles.

    Returns ``(frame, true_mask)``.
    """
    rng = np.random.default_rng(seed)
    colors = PUDDLE_FLOORS[int(rng.integers(len(PUDDLE_FLOORS)))]
    canvas = floor_texture(height, width, colors, int(rng.integers(24, 48)), 0.0, rng)
    truth = np.zeros((height, width), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        r = rng.uniform(18, 40)
        cx = rng.uniform(r + 10, width - r - 10)
        cy = rng.uniform(r + 10, height - r - 10)
        poly = _puddle_polygon(rng, cx, cy, r)
        res = polygon_coverage(poly, (height, width))
        if res is None:
            continue
        y0, x0, cov = res
        m = np.zeros((height, width), dtype=bool)
        m[y0 : y0 + cov.shape[0], x0 : x0 + cov.shape[1]] = cov >= 0.5
        wet = canvas[m].astype(np.float64) * 0.2 + GLOSS * 0.8
        canvas[m] = np.clip(np.rint(wet), 0, 255).astype(np.uint8)
        truth |= m
    return add_noise(canvas, noise, rng), truth


# ----------------------------------------------------------------------------
# litter


LITTER_FLOOR = ((150, 148, 140), (138, 136, 130))


def render_litter_frame(width: int, height: int, blobs, noise: float = 2.0, seed: int = 0) -> np.ndarray:
    """Floor with square colour blobs; ``blobs`` holds ``(x, y, size, class_id)``."""
    rng = np.random.default_rng(seed)
    canvas = floor_texture(height, width, LITTER_FLOOR, 64, 0.0, rng)
    colors = {c["id"]: c["color"] for c in LITTER_CLASSES}
    for x, y, s, cid in blobs:
        canvas[y : y + s, x : x + s] = colors[cid]
    return add_noise(canvas, noise, rng)


def random_litter_scene(
    width: int, height: int, n_blobs: int = 20, size_range=(8, 16), seed: int = 0, noise: float = 2.0
) -> tuple[np.ndarray, list[DetectionBox]]:
    """Non-overlapping litter blobs at random positions; returns frame and true boxes."""
    rng = np.random.default_rng(seed)
    placed: list[tuple[int, int, int, int]] = []
    tries = 0
    while len(placed) < n_blobs and tries < 100 * n_blobs:
        tries += 1
        s = int(rng.integers(size_range[0], size_range[1] + 1))
        x = int(rng.integers(4, width - s - 4))
        y = int(rng.integers(4, height - s - 4))
        if any(abs(x - px) < s + ps + 8 and abs(y - py) < s + ps + 8 for px, py, ps, _ in placed):
            continue
        placed.append((x, y, s, int(rng.integers(len(LITTER_CLASSES)))))
    frame = render_litter_frame(width, height, placed, noise, seed + 1)
    boxes = [DetectionBox(x, y, s, s, cid, 1.0) for x, y, s, cid in placed]
    return frame, boxes


def litter_manifest(extra_classes=()) -> dict:
    return {"classes": list(LITTER_CLASSES) + list(extra_classes)}


# ----------------------------------------------------------------------------
# perspective scenes


@dataclass
class SceneItem:
    kind: str
    x: float
    z: float
    props: dict = field(default_factory=dict)

    KINDS = ("litter_blob", "bin", "puddle", "person_silhouette", "marker_cube")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown item kind {self.kind!r}")

    @classmethod
    def from_json(cls, d: dict) -> "SceneItem":
        props = {k: v for k, v in d.items() if k not in ("kind", "x", "z")}
        return cls(d["kind"], float(d["x"]), float(d["z"]), props)

    def to_json(self) -> dict:
        return {"kind": self.kind, "x": self.x, "z": self.z, **self.props}


@dataclass
class SceneSpec:
    camera: CameraPose
    resolution: tuple[int, int]
    items: list[SceneItem] = field(default_factory=list)
    floor_colors: tuple = BIN_FLOOR
    floor_tile: float = 1.0
    background: tuple = (200, 200, 205)
    noise: float = 2.0
    classes: list[dict] = field(default_factory=lambda: list(LITTER_CLASSES) + [PERSON_CLASS])

    @classmethod
    def from_json(cls, d: dict) -> "SceneSpec":
        floor = d.get("floor", {})
        return cls(
            camera=CameraPose.from_json(d["camera"]),
            resolution=tuple(int(v) for v in d["resolution"]),
            items=[SceneItem.from_json(i) for i in d.get("items", [])],
            floor_colors=tuple(tuple(c) for c in floor.get("colors", BIN_FLOOR)),
            floor_tile=float(floor.get("tile", 1.0)),
            background=tuple(floor.get("background", (200, 200, 205))),
            noise=float(floor.get("noise", 2.0)),
            classes=d.get("classes", list(LITTER_CLASSES) + [PERSON_CLASS]),
        )

    def to_json(self) -> dict:
        return {
            "camera": self.camera.to_json(),
            "resolution": list(self.resolution),
            "floor": {
                "colors": [list(c) for c in self.floor_colors],
                "tile": self.floor_tile,
                "background": list(self.background),
                "noise": self.noise,
            },
            "classes": self.classes,
            "items": [i.to_json() for i in self.items],
        }


class PinholeCamera:
    """World -> continuous image coordinates for a :class:`CameraPose`."""

    def __init__(self, pose: CameraPose, resolution: tuple[int, int]):
        self.pose = pose
        self.width, self.height = resolution
        self.f, self.r, self.u = pose.basis()
        self.c = np.asarray(pose.position, dtype=np.float64)
        self.fx = (self.width / 2) / math.tan(pose.hfov / 2)
        self.fy = (self.height / 2) / math.tan(pose.vfov / 2)

    def project(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Returns ``(uv, depth)``; ``uv`` is meaningless where depth <= 0."""
        v = np.atleast_2d(np.asarray(pts, dtype=np.float64)) - self.c
        depth = v @ self.f
        safe = np.where(np.abs(depth) < 1e-12, 1e-12, depth)
        uu = self.width / 2 + self.fx * (v @ self.r) / safe
        vv = self.height / 2 - self.fy * (v @ self.u) / safe
        return np.column_stack([uu, vv]), depth

    def floor_homography(self, floor_y: float = 0.0) -> np.ndarray:
        """Exact image -> floor (x, z) homography for the plane ``y = floor_y``."""
        # Floor point (X, Z) -> homogeneous image point: K [r; -u; f] (P - C).
        k = np.array([[self.fx, 0, self.width / 2], [0, self.fy, self.height / 2], [0, 0, 1.0]])
        rot = np.vstack([self.r, -self.u, self.f])
        # P = (X, floor_y, Z)  =>  P - C = X e_x + Z e_z + (0, floor_y, 0) - C
        cols = np.column_stack([rot[:, 0], rot[:, 2], rot @ (np.array([0.0, floor_y, 0.0]) - self.c)])
        floor_to_image = k @ cols
        h = np.linalg.inv(floor_to_image)
        return h / h[2, 2]

    def ray_floor(self, floor_y: float = 0.0):
        """Floor (x, z) hit by each pixel centre's ray, and a validity mask."""
        yy, xx = np.mgrid[0 : self.height, 0 : self.width]
        a = (xx + 0.5 - self.width / 2) / self.fx
        b = -(yy + 0.5 - self.height / 2) / self.fy
        d = self.f[None, None, :] + a[..., None] * self.r + b[..., None] * self.u
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (floor_y - self.c[1]) / d[..., 1]
        valid = (d[..., 1] < -1e-9) & (t > 0)
        t = np.where(valid, t, 0.0)
        return self.c[0] + t * d[..., 0], self.c[2] + t * d[..., 2], valid


def _floor_square(x, z, size, yaw=0.0):
    s = size / 2
    local = np.array([[-s, -s], [s, -s], [s, s], [-s, s]])
    c, sn = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -sn], [sn, c]])
    xz = local @ rot.T + np.array([x, z])
    return np.column_stack([xz[:, 0], np.zeros(4), xz[:, 1]])


class _Renderer:
    def __init__(self, spec: SceneSpec, rng: np.random.Generator):
        self.spec = spec
        self.cam = PinholeCamera(spec.camera, spec.resolution)
        w, h = spec.resolution
        self.canvas = np.zeros((h, w, 3), dtype=np.uint8)
        self.owner = np.full((h, w), -1, dtype=np.int32)
        self.rng = rng

    def project_poly(self, pts3):
        uv, depth = self.cam.project(pts3)
        if np.any(depth <= 1e-6):
            return None
        return uv

    def floor(self):
        fx, fz, valid = self.cam.ray_floor()
        t = self.spec.floor_tile
        parity = (np.floor(fx / t) + np.floor(fz / t)).astype(np.int64) % 2
        colors = np.asarray(self.spec.floor_colors, dtype=np.uint8)
        self.canvas[:] = np.asarray(self.spec.background, dtype=np.uint8)
        self.canvas[valid] = colors[parity[valid]]


def _color_of(classes, cid):
    for c in classes:
        if int(c["id"]) == int(cid):
            return tuple(c["color"])
    raise ValueError(f"unknown class id {cid}")


def render_scene_frame(spec: SceneSpec, frame_index: int, seed: int):
    """Render one frame; returns ``(image, frame_truth_dict, stain_mask)``."""
    rng = np.random.default_rng([seed, frame_index])
    r = _Renderer(spec, rng)
    r.floor()
    shape = r.canvas.shape[:2]
    truth = {"boxes": [], "bins": [], "people": [], "markers": [], "offscreen": []}

    def item_pos(i, item):
        vx = float(item.props.get("vx", 0.0))
        vz = float(item.props.get("vz", 0.0))
        return item.x + vx * frame_index, item.z + vz * frame_index

    order = []
    for i, item in enumerate(spec.items):
        x, z = item_pos(i, item)
        dist = float(np.linalg.norm(np.array([x, 0.0, z]) - r.cam.c))
        # Puddles and floor tags lie flat, so they go first.
        flat = item.kind in ("puddle", "marker_cube", "litter_blob")
        order.append((0 if flat else 1, -dist, i))
    order.sort()

    for _, _, i in order:
        item = spec.items[i]
        x, z = item_pos(i, item)
        p = item.props
        label = p.get("id", f"{item.kind}{i}")
        if item.kind == "puddle":
            rx, rz = float(p.get("rx", 0.5)), float(p.get("rz", 0.3))
            t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
            pts = np.column_stack([x + rx * np.cos(t), np.zeros_like(t), z + rz * np.sin(t)])
            uv = r.project_poly(pts)
            if uv is None:
                truth["offscreen"].append(label)
                continue
            res = polygon_coverage(uv, shape)
            if res is None:
                truth["offscreen"].append(label)
                continue
            y0, x0, cov = res
            m = np.zeros(shape, dtype=bool)
            m[y0 : y0 + cov.shape[0], x0 : x0 + cov.shape[1]] = cov >= 0.5
            wet = r.canvas[m].astype(np.float64) * 0.2 + GLOSS * 0.8
            r.canvas[m] = np.clip(np.rint(wet), 0, 255).astype(np.uint8)
            r.owner[m] = i
        elif item.kind == "litter_blob":
            size = float(p.get("size", 0.1))
            cid = int(p.get("class", 0))
            uv = r.project_poly(_floor_square(x, z, size, float(p.get("yaw", 0.0))))
            drawn = None if uv is None else fill_polygon(r.canvas, uv, _color_of(spec.classes, cid), owner=r.owner, owner_id=i)
            bb = None if drawn is None else mask_bbox(drawn)
            if bb is None:
                truth["offscreen"].append(label)
                continue
            truth["boxes"].append({"x": bb[0], "y": bb[1], "w": bb[2], "h": bb[3], "class": cid, "item": i})
        elif item.kind == "marker_cube":
            size = float(p.get("size", 0.4))
            yaw = float(p.get("yaw", 0.0))
            mid = int(p.get("marker_id", 0))
            ok = _draw_floor_marker(r, x, z, size, yaw, mid, i)
            if not ok:
                truth["offscreen"].append(label)
                continue
            truth["markers"].append({"marker_id": mid, "x": x, "y": z, "size": size, "yaw": yaw})
        elif item.kind == "person_silhouette":
            width_m = float(p.get("width", 0.5))
            height_m = float(p.get("height", 1.7))
            cid = int(p.get("class", PERSON_CLASS["id"]))
            rh = np.array([r.cam.r[0], 0.0, r.cam.r[2]])
            rh /= max(np.linalg.norm(rh), 1e-12)
            base = np.array([x, 0.0, z])
            up = np.array([0.0, height_m, 0.0])
            quad = np.array([base - rh * width_m / 2, base + rh * width_m / 2, base + rh * width_m / 2 + up, base - rh * width_m / 2 + up])
            uv = r.project_poly(quad)
            drawn = None if uv is None else fill_polygon(r.canvas, uv, _color_of(spec.classes, cid), owner=r.owner, owner_id=i)
            bb = None if drawn is None else mask_bbox(drawn)
            if bb is None:
                truth["offscreen"].append(label)
                continue
            truth["people"].append({"id": str(label), "x": x, "y": z, "box": {"x": bb[0], "y": bb[1], "w": bb[2], "h": bb[3]}})
        elif item.kind == "bin":
            res = _draw_scene_bin(r, x, z, p, i)
            if res is None:
                truth["offscreen"].append(label)
                continue
            rim, roi = res
            truth["bins"].append({"bin_id": str(label), "state": "Full" if p.get("full") else "Empty", "roi": roi, "ellipse": rim.as_dict()})

    if any(truth["offscreen"]):
        log.warning("frame %d: items outside the view: %s", frame_index, truth["offscreen"])
    stain = np.zeros(shape, dtype=bool)
    for i, item in enumerate(spec.items):
        if item.kind == "puddle":
            stain |= r.owner == i
    image = add_noise(r.canvas, spec.noise, rng)
    return image, truth, stain


def _draw_floor_marker(r: _Renderer, x, z, size, yaw, marker_id, owner_id) -> bool:
    cells = marker_cells(marker_id)
    cell = size / cells.shape[0]
    quiet = _floor_square(x, z, size + 2 * cell, yaw)
    uv = r.project_poly(quiet)
    if uv is None or polygon_coverage(uv, r.canvas.shape[:2]) is None:
        return False
    fill_polygon(r.canvas, uv, (245, 245, 245), supersample=4, owner=r.owner, owner_id=owner_id)
    c, sn = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -sn], [sn, c]])
    n = cells.shape[0]
    for i in range(n):
        for j in range(n):
            if cells[i, j]:
                continue
            local = np.array([[j, i], [j + 1, i], [j + 1, i + 1], [j, i + 1]], dtype=np.float64) * cell - size / 2
            xz = local @ rot.T + np.array([x, z])
            pts = np.column_stack([xz[:, 0], np.zeros(4), xz[:, 1]])
            uv = r.project_poly(pts)
            if uv is not None:
                fill_polygon(r.canvas, uv, (15, 15, 15), supersample=4)
    return True


def _draw_scene_bin(r: _Renderer, x, z, p, owner_id):
    from .imaging.hough import fit_ellipse_lsq

    radius = float(p.get("radius", 0.3))
    height = float(p.get("height", 0.8))
    t = np.linspace(0, 2 * math.pi, 96, endpoint=False)
    top = np.column_stack([x + radius * np.cos(t), np.full_like(t, height), z + radius * np.sin(t)])
    bottom = top.copy()
    bottom[:, 1] = 0.0
    uv_top = r.project_poly(top)
    uv_bot = r.project_poly(bottom)
    if uv_top is None or uv_bot is None:
        return None
    rim = fit_ellipse_lsq(uv_top[:, 0] - 0.5, uv_top[:, 1] - 0.5)
    if rim is None:
        return None
    h, w = r.canvas.shape[:2]
    hull = convex_hull(np.vstack([uv_top, uv_bot]))
    if polygon_coverage(hull, (h, w)) is None:
        return None
    draw_bin(r.canvas, rim, hull, bool(p.get("full", False)), np.random.default_rng(int(p.get("seed", owner_id))), float(p.get("occlusion", 0.0)))
    x0, y0, rw, rh = rim_roi(rim, (h, w))
    return rim, {"x": x0, "y": y0, "w": rw, "h": rh}


def synthesize(spec: SceneSpec, frames: int = 1, seed: int = 0, out_dir: str | Path | None = None):
    """Render ``frames`` frames of ``spec``; optionally write them with a manifest.

    Returns ``(images, manifest)``. Output is a pure function of
    ``(spec, frames, seed)``.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "masks").mkdir(parents=True, exist_ok=True)
    cam = PinholeCamera(spec.camera, spec.resolution)
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "resolution": list(spec.resolution),
        "classes": spec.classes,
        "floor_homography": [[float(v) for v in row] for row in cam.floor_homography()],
        "frames": [],
    }
    images = []
    markers, rois = {}, {}
    for k in range(frames):
        img, truth, stain = render_scene_frame(spec, k, seed)
        name = f"frame_{k:04d}.png"
        entry = {"frame": name, **truth}
        entry["stain_pixels"] = int(stain.sum())
        if out is not None:
            write_image(out / name, img)
            mask_name = f"masks/frame_{k:04d}.pgm"
            write_mask(out / mask_name, stain)
            entry["stain_mask"] = mask_name
        for m in truth["markers"]:
            markers[str(m["marker_id"])] = {"x": m["x"], "y": m["y"], "size": m["size"], "yaw": m["yaw"]}
        for b in truth["bins"]:
            rois.setdefault(b["bin_id"], b["roi"])
        manifest["frames"].append(entry)
        images.append(img)
    manifest["markers"] = markers
    manifest["rois"] = rois
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
        (out / "scene.json").write_text(json.dumps(spec.to_json(), indent=1, sort_keys=True))
    return images, manifest


def demo_scene(resolution: tuple[int, int] = (960, 540)) -> SceneSpec:
    """A small concourse: two bins, a puddle, litter, four floor tags and two walkers."""
    cam = CameraPose((0.0, 3.0, 0.0), yaw=0.0, pitch=-0.5, hfov=math.radians(70), vfov=2 * math.atan(math.tan(math.radians(35)) * resolution[1] / resolution[0]))
    items = [
        SceneItem("puddle", 5.0, -0.8, {"rx": 0.7, "rz": 0.45, "id": "puddle0"}),
        SceneItem("marker_cube", 3.0, -1.5, {"size": 0.5, "marker_id": 0}),
        SceneItem("marker_cube", 3.0, 1.5, {"size": 0.5, "marker_id": 1}),
        SceneItem("marker_cube", 6.5, -2.0, {"size": 0.6, "marker_id": 2}),
        SceneItem("marker_cube", 6.5, 2.0, {"size": 0.6, "marker_id": 3}),
        SceneItem("litter_blob", 4.0, 0.4, {"size": 0.12, "class": 0}),
        SceneItem("litter_blob", 5.5, 1.2, {"size": 0.1, "class": 1}),
        SceneItem("litter_blob", 7.0, -0.6, {"size": 0.12, "class": 2}),
        SceneItem("bin", 4.5, -2.6, {"radius": 0.3, "height": 0.8, "full": False, "id": "bin_a", "seed": 1}),
        SceneItem("bin", 4.5, 2.6, {"radius": 0.3, "height": 0.8, "full": True, "id": "bin_b", "seed": 2}),
        SceneItem("person_silhouette", 6.0, -1.0, {"vx": -0.05, "vz": 0.08, "id": "p0"}),
        SceneItem("person_silhouette", 8.0, 1.5, {"vx": -0.08, "vz": -0.03, "id": "p1"}),
    ]
    return SceneSpec(cam, resolution, items)
