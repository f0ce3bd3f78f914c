"""Slow, independent reference implementations used by the tests."""

import itertools
import math

import numpy as np


def segment_crosses_box(p, q, lo, hi):
    """Face-plane test: does segment p->q pass through the open box (lo, hi)?

    Either an endpoint lies strictly inside, or the segment pierces the open
    interior of one of the six faces.
    """
    p, q, lo, hi = (np.asarray(v, float) for v in (p, q, lo, hi))

    def inside(x):
        return bool(np.all(x > lo) and np.all(x < hi))

    if inside(p) or inside(q):
        return True
    d = q - p
    for axis in range(3):
        if d[axis] == 0:
            continue
        for plane in (lo[axis], hi[axis]):
            t = (plane - p[axis]) / d[axis]
            if not 0 < t < 1:
                continue
            x = p + t * d
            others = [a for a in range(3) if a != axis]
            if all(lo[a] < x[a] < hi[a] for a in others):
                return True
    return False


def camera_axes(yaw, pitch):
    f = np.array([math.cos(pitch) * math.cos(yaw), math.sin(pitch), math.cos(pitch) * math.sin(yaw)])
    r = np.cross(f, [0.0, 1.0, 0.0])
    r /= np.linalg.norm(r)
    return f, r, np.cross(r, f)


def visible_oracle(cam, probe, occluders):
    c = np.asarray(cam["position"], float)
    v = np.asarray(probe, float) - c
    f, r, u = camera_axes(cam["yaw"], cam["pitch"])
    depth = v @ f
    if depth <= 0:
        return False
    if abs(math.atan2(v @ r, depth)) > cam["hfov"] / 2 + 1e-12:
        return False
    if abs(math.atan2(v @ u, depth)) > cam["vfov"] / 2 + 1e-12:
        return False
    if math.sqrt(v @ v) > cam.get("max_range", 50.0):
        return False
    return not any(segment_crosses_box(c, probe, lo, hi) for lo, hi in occluders)


def min_cover_size(sets, universe):
    """Exhaustive minimum number of sets whose union covers ``universe``."""
    universe = set(universe)
    for k in range(len(sets) + 1):
        for combo in itertools.combinations(range(len(sets)), k):
            if universe <= set().union(*(sets[i] for i in combo)):
                return k
    return None
