"""Ellipse geometry: parameter conversions and rasterisation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ellipse:
    """Centre ``(cx, cy)``, semi-axes ``a >= b > 0``, rotation ``theta`` in [0, pi).

    ``theta`` is the angle of the major axis measured from +x towards +y
    (image coordinates, y pointing down).
    """

    cx: float
    cy: float
    a: float
    b: float
    theta: float = 0.0

    def __post_init__(self):
        if not (self.b > 0 and self.a > 0):
            raise ValueError(f"semi-axes must be positive: a={self.a}, b={self.b}")

    @classmethod
    def normalized(cls, cx, cy, a, b, theta) -> "Ellipse":
        """Build an ellipse, swapping axes and wrapping theta as needed."""
        if b > a:
            a, b = b, a
            theta += math.pi / 2
        return cls(float(cx), float(cy), float(a), float(b), float(theta % math.pi))

    def point(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = self.a * np.cos(t)
        v = self.b * np.sin(t)
        return self.cx + c * u - s * v, self.cy + s * u + c * v

    def perimeter(self) -> float:
        # Ramanujan's second approximation.
        a, b = self.a, self.b
        h = ((a - b) / (a + b)) ** 2
        return math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))

    def normalized_radius(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """(x'/a)^2 + (y'/b)^2 in the ellipse frame; < 1 strictly inside."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = x - self.cx, y - self.cy
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u / self.a) ** 2 + (v / self.b) ** 2

    def to_conic(self) -> np.ndarray:
        """Coefficients (A, B, C, D, E, F) of A x^2 + B xy + C y^2 + D x + E y + F = 0."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        a2, b2 = self.a**2, self.b**2
        A = c * c / a2 + s * s / b2
        B = 2 * c * s * (1 / a2 - 1 / b2)
        C = s * s / a2 + c * c / b2
        D = -2 * A * self.cx - B * self.cy
        E = -B * self.cx - 2 * C * self.cy
        F = A * self.cx**2 + B * self.cx * self.cy + C * self.cy**2 - 1
        return np.array([A, B, C, D, E, F])

    def as_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "a": self.a, "b": self.b, "theta": self.theta}


def conic_to_ellipse(coef) -> Ellipse | None:
    """Convert general conic coefficients to an :class:`Ellipse`, or None."""
    A, B, C, D, E, F = (float(v) for v in coef)
    det = 4 * A * C - B * B
    if det <= 0 or not math.isfinite(det):
        return None
    cx = (B * E - 2 * C * D) / det
    cy = (B * D - 2 * A * E) / det
    f0 = A * cx * cx + B * cx * cy + C * cy * cy + D * cx + E * cy + F
    m = np.array([[A, B / 2], [B / 2, C]])
    evals, evecs = np.linalg.eigh(m)
    if f0 == 0 or not np.all(-f0 / evals > 0):
        return None
    axes = np.sqrt(-f0 / evals)
    # Smallest eigenvalue -> longest axis.
    major = int(np.argmax(axes))
    vx, vy = evecs[:, major]
    theta = math.atan2(vy, vx) % math.pi
    a, b = float(axes[major]), float(axes[1 - major])
    if not (math.isfinite(a) and math.isfinite(b)) or b <= 0:
        return None
    return Ellipse(cx, cy, a, b, theta)


def _thin_chain(px: np.ndarray, py: np.ndarray) -> list[tuple[int, int]]:
    pts: list[tuple[int, int]] = []
    for x, y in zip(px.tolist(), py.tolist()):
        if not pts or pts[-1] != (x, y):
            pts.append((x, y))
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts.pop()
    # Drop L-corners whose neighbours are already 8-adjacent.
    out: list[tuple[int, int]] = []
    n = len(pts)
    for i in range(n):
        prev = out[-1] if out else pts[i - 1]
        nxt = pts[(i + 1) % n]
        if n > 4 and max(abs(prev[0] - nxt[0]), abs(prev[1] - nxt[1])) <= 1:
            continue
        out.append(pts[i])
    seen = set()
    uniq = []
    for p in out:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    return uniq


def perimeter_pixels(
    ellipse: Ellipse, shape: tuple[int, int] | None = None, arc: str = "full"
) -> np.ndarray:
    """Thin 8-connected rasterisation of the perimeter as an ``(N, 2)`` array of (x, y).

    ``arc="upper"`` keeps the part above the horizontal line through the
    centre (smaller image y). Pixels outside ``shape`` are dropped.
    """
    n = max(64, int(math.ceil(8 * ellipse.perimeter())))
    t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    x, y = ellipse.point(t)
    px = np.rint(x).astype(np.int64)
    py = np.rint(y).astype(np.int64)
    pts = np.array(_thin_chain(px, py), dtype=np.int64).reshape(-1, 2)
    if arc == "upper":
        pts = pts[pts[:, 1] < ellipse.cy]
    elif arc != "full":
        raise ValueError(f"arc must be 'full' or 'upper', got {arc!r}")
    if shape is not None:
        h, w = shape
        ok = (pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)
        pts = pts[ok]
    return pts


def perimeter_mask(ellipse: Ellipse, shape: tuple[int, int], arc: str = "full") -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    pts = perimeter_pixels(ellipse, shape, arc)
    mask[pts[:, 1], pts[:, 0]] = True
    return mask


def interior_mask(ellipse: Ellipse, shape: tuple[int, int]) -> np.ndarray:
    """Pixels whose centres lie strictly inside the ellipse."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    return ellipse.normalized_radius(xx.astype(np.float64), yy.astype(np.float64)) < 1.0


def angle_difference(t1: float, t2: float) -> float:
    """Distance between two axis orientations, modulo pi."""
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)
