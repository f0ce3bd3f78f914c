"""Randomised Hough transform for ellipses.

Five edge pixels define a conic. Many such samples vote into clusters in
(cx, cy, a, b, theta) space; the strongest clusters are refined with a direct
least-squares ellipse fit on their inlier pixels and finally scored by how
much of their predicted perimeter is present in the edge map.
"""

from __future__ import annotations

import math

import numpy as np

from .components import connected_components
from .ellipse import Ellipse, angle_difference, conic_to_ellipse, perimeter_pixels
from .filters import dilate

Rect = tuple[int, int, int, int]


def _normalize(x: np.ndarray, y: np.ndarray):
    mx, my = float(x.mean()), float(y.mean())
    s = float(np.sqrt(((x - mx) ** 2 + (y - my) ** 2).mean())) or 1.0
    return (x - mx) / s, (y - my) / s, mx, my, s


def _denormalize(e: Ellipse, mx: float, my: float, s: float) -> Ellipse:
    return Ellipse(mx + s * e.cx, my + s * e.cy, s * e.a, s * e.b, e.theta)


def fit_conic_exact(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Null vectors of the (n, 5, 6) design matrices for batched 5-point samples."""
    d = np.stack([xs * xs, xs * ys, ys * ys, xs, ys, np.ones_like(xs)], axis=-1)
    _, _, vh = np.linalg.svd(d)
    return vh[:, -1, :]


def fit_ellipse_lsq(x: np.ndarray, y: np.ndarray) -> Ellipse | None:
    """Direct least-squares ellipse fit (numerically stable Fitzgibbon variant)."""
    if len(x) < 6:
        return None
    xn, yn, mx, my, s = _normalize(np.asarray(x, float), np.asarray(y, float))
    d1 = np.column_stack([xn * xn, xn * yn, yn * yn])
    d2 = np.column_stack([xn, yn, np.ones_like(xn)])
    s1, s2, s3 = d1.T @ d1, d1.T @ d2, d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        return None
    m = s1 + s2 @ t
    m = np.array([m[2] / 2, -m[1], m[0] / 2])
    try:
        evals, evecs = np.linalg.eig(m)
    except np.linalg.LinAlgError:
        return None
    evecs = np.real(evecs)
    cond = 4 * evecs[0] * evecs[2] - evecs[1] ** 2
    idx = np.nonzero(cond > 0)[0]
    if len(idx) == 0:
        return None
    a1 = evecs[:, idx[0]]
    e = conic_to_ellipse(np.concatenate([a1, t @ a1]))
    if e is None:
        return None
    return _denormalize(e, mx, my, s)


def sampson_distance(e: Ellipse, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    A, B, C, D, E, F = e.to_conic()
    val = A * x * x + B * x * y + C * y * y + D * x + E * y + F
    gx = 2 * A * x + B * y + D
    gy = B * x + 2 * C * y + E
    return np.abs(val) / np.maximum(np.hypot(gx, gy), 1e-12)


def perimeter_score(e: Ellipse, support: np.ndarray) -> float:
    """Fraction of rasterised perimeter pixels that hit ``support``."""
    pts = perimeter_pixels(e)
    if len(pts) == 0:
        return 0.0
    h, w = support.shape
    ok = (pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)
    hits = support[pts[ok, 1], pts[ok, 0]].sum()
    return float(hits) / len(pts)


def _similar(e1: Ellipse, e2: Ellipse, tol: float) -> bool:
    if math.hypot(e1.cx - e2.cx, e1.cy - e2.cy) > tol:
        return False
    if abs(e1.a - e2.a) > tol or abs(e1.b - e2.b) > tol:
        return False
    round_ish = (e1.a - e1.b) < tol or (e2.a - e2.b) < tol
    return round_ish or angle_difference(e1.theta, e2.theta) < 0.15


def _mean_ellipse(members: list[Ellipse]) -> Ellipse:
    cx = np.mean([m.cx for m in members])
    cy = np.mean([m.cy for m in members])
    a = np.mean([m.a for m in members])
    b = np.mean([m.b for m in members])
    # Average orientation on the doubled-angle circle.
    th = 0.5 * math.atan2(
        sum(math.sin(2 * m.theta) for m in members), sum(math.cos(2 * m.theta) for m in members)
    )
    return Ellipse.normalized(cx, cy, a, b, th)


def _sample_indices(rng, groups: list[np.ndarray], n_points: int, n_iter: int) -> np.ndarray:
    sizes = np.array([len(g) for g in groups], dtype=np.float64)
    probs = sizes / sizes.sum()
    picks = np.empty((n_iter, 5), dtype=np.int64)
    use_group = rng.random(n_iter) < 0.7
    group_ids = rng.choice(len(groups), size=n_iter, p=probs)
    for i in range(n_iter):
        if use_group[i]:
            g = groups[group_ids[i]]
            picks[i] = g[rng.choice(len(g), size=5, replace=False)]
        else:
            picks[i] = rng.choice(n_points, size=5, replace=False)
    return picks


def hough_ellipse(
    edges: np.ndarray,
    roi: Rect | None = None,
    axis_range: tuple[float, float] = (3.0, math.inf),
    top_k: int = 5,
    n_iter: int = 800,
    seed: int = 0,
    inlier_tol: float = 1.5,
) -> list[tuple[Ellipse, float]]:
    """Detect ellipses in a binary edge map.

    ``roi`` is ``(x, y, w, h)``; only edge pixels inside it are sampled.
    Returns up to ``top_k`` ``(ellipse, score)`` pairs sorted by descending
    score, where score is the fraction of the predicted perimeter present in
    ``edges`` (with one pixel of slack).
    """
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    x0, y0, rw, rh = roi if roi is not None else (0, 0, w, h)
    if x0 < 0 or y0 < 0 or x0 + rw > w or y0 + rh > h or rw <= 0 or rh <= 0:
        raise ValueError(f"roi {roi} is not inside the {w}x{h} image")
    amin, amax = axis_range
    if amin < 3:
        raise ValueError("axis_range minimum must be >= 3 px")

    sub = edges[y0 : y0 + rh, x0 : x0 + rw]
    ys, xs = np.nonzero(sub)
    if len(xs) < 5:
        return []
    xs = xs.astype(np.float64) + x0
    ys = ys.astype(np.float64) + y0

    lmap = connected_components(sub, connectivity=8)
    flat_labels = lmap.labels[sub]
    groups = [np.nonzero(flat_labels == lab)[0] for lab in range(1, lmap.count + 1)]
    groups = [g for g in groups if len(g) >= 5] or [np.arange(len(xs))]

    rng = np.random.default_rng(seed)
    picks = _sample_indices(rng, groups, len(xs), n_iter)
    xn, yn, mx, my, s = _normalize(xs, ys)
    conics = fit_conic_exact(xn[picks], yn[picks])

    clusters: list[list[Ellipse]] = []
    reps: list[Ellipse] = []
    tol = 3.0
    for coef in conics:
        e = conic_to_ellipse(coef)
        if e is None:
            continue
        e = _denormalize(e, mx, my, s)
        if not (amin <= e.b and e.a <= amax):
            continue
        if not (x0 <= e.cx < x0 + rw and y0 <= e.cy < y0 + rh):
            continue
        for ci, rep in enumerate(reps):
            if _similar(rep, e, tol):
                clusters[ci].append(e)
                break
        else:
            clusters.append([e])
            reps.append(e)
    if not clusters:
        return []

    order = sorted(range(len(clusters)), key=lambda i: -len(clusters[i]))
    support = dilate(edges, 1)
    scored: list[tuple[Ellipse, float, int]] = []
    for ci in order[: max(4 * top_k, 10)]:
        e = _mean_ellipse(clusters[ci])
        for _ in range(3):
            inl = sampson_distance(e, xs, ys) < inlier_tol
            refined = fit_ellipse_lsq(xs[inl], ys[inl])
            if refined is None or not (amin <= refined.b and refined.a <= amax):
                break
            e = refined
        scored.append((e, perimeter_score(e, support), len(clusters[ci])))

    scored.sort(key=lambda t: (-t[1], -t[2], t[0].cx, t[0].cy))
    results: list[tuple[Ellipse, float]] = []
    for e, score, _ in scored:
        if any(_similar(e, r, 2.0) for r, _ in results):
            continue
        results.append((e, score))
        if len(results) == top_k:
            break
    return results
