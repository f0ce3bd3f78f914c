import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentinel.bins import (
    BinROI,
    BinState,
    OccupancyParams,
    classify,
    classify_frame,
    detect_rim,
    expected_rim_pixels,
    interior_heterogeneity,
    load_rois,
    rim_occlusion,
    rois_to_json,
)
from sentinel.imaging.color import rgb_to_hsv
from sentinel.imaging.ellipse import Ellipse, interior_mask, perimeter_mask, perimeter_pixels
from sentinel.synth import render_bin_view


def rim_error(e, t):
    return math.hypot(e.cx - t.cx, e.cy - t.cy), abs(e.a - t.a), abs(e.b - t.b)


def test_roi_validation():
    with pytest.raises(ValueError):
        BinROI(0, 0, 20, 20).validate((100, 100, 3))
    with pytest.raises(ValueError):
        BinROI(90, 0, 40, 40).validate((100, 100, 3))
    BinROI(0, 0, 32, 32).validate((100, 100, 3))


def test_params_validation():
    with pytest.raises(ValueError):
        OccupancyParams(canny_low=130, canny_high=120)
    assert OccupancyParams.from_dict({"interior_std_threshold": 20, "junk": 1}).interior_std_threshold == 20


def test_detect_rim_on_clean_render():
    v = render_bin_view(11, full=False, occlusion=0.0, noise=0.0)
    e = detect_rim(v.frame, BinROI(*v.roi))
    dc, da, db = rim_error(e, v.ellipse)
    assert dc <= 2 and da <= 2 and db <= 2


def test_detect_rim_with_30_percent_occlusion():
    v = render_bin_view(12, full=False, occlusion=0.3, noise=0.0)
    e = detect_rim(v.frame, BinROI(*v.roi))
    assert e is not None
    assert rim_error(e, v.ellipse)[0] <= 5


def test_blank_roi_has_no_rim():
    frame = np.full((120, 160, 3), (180, 150, 110), np.uint8)
    roi = BinROI(20, 20, 100, 80)
    assert detect_rim(frame, roi) is None
    v = classify(frame, roi)
    assert v.state is BinState.UNKNOWN and v.ellipse is None


def test_interior_constant_is_zero():
    frame = np.full((100, 120, 3), (60, 60, 62), np.uint8)
    assert interior_heterogeneity(frame, Ellipse(60, 50, 30, 20, 0.0)) == 0.0


def test_interior_checkerboard_two_point_std():
    yy, xx = np.mgrid[0:100, 0:120]
    lo, hi = np.array([255, 229, 229], np.uint8), np.array([255, 25, 25], np.uint8)  # S = 26, 230
    frame = np.where(((xx + yy) % 2 == 0)[..., None], lo, hi).astype(np.uint8)
    s = rgb_to_hsv(frame)[..., 1]
    assert set(np.unique(s)) == {26, 230}
    std = interior_heterogeneity(frame, Ellipse(60, 50, 30, 20, 0.0), OccupancyParams(std_on_blurred=False))
    assert std == pytest.approx(102, abs=0.5)


def test_interior_std_grows_with_noise():
    rng = np.random.default_rng(0)
    base = np.full((100, 120, 3), (150, 90, 60), np.float64)
    e = Ellipse(60, 50, 30, 20, 0.0)
    u = rng.uniform(-1, 1, base.shape[:2])[..., None]
    stds = []
    for amp in (0, 10, 20, 40, 60):
        frame = np.clip(np.rint(base + amp * u * np.array([0.0, 1.0, 1.0])), 0, 255).astype(np.uint8)
        stds.append(interior_heterogeneity(frame, e))
    assert all(b > a for a, b in zip(stds, stds[1:]))


def test_interior_empty_raises():
    with pytest.raises(ValueError):
        interior_heterogeneity(np.zeros((50, 50, 3), np.uint8), Ellipse(25, 25, 1.5, 1.0, 0.0))


def test_rim_occlusion_exact_and_empty():
    e = Ellipse(80, 60, 40, 20, 0.1)
    edges = perimeter_mask(e, (120, 160), "upper")
    assert rim_occlusion(edges, e) == 1.0
    assert rim_occlusion(np.zeros_like(edges), e) == 0.0
    assert expected_rim_pixels(e) == edges.sum()


def test_rim_occlusion_after_erasing_40_percent():
    e = Ellipse(80, 60, 40, 20, 0.0)
    pts = perimeter_pixels(e, (120, 160), "upper")
    pts = pts[np.argsort(pts[:, 0], kind="stable")]
    keep = pts[int(round(0.4 * len(pts))) :]
    edges = np.zeros((120, 160), bool)
    edges[keep[:, 1], keep[:, 0]] = True
    assert rim_occlusion(edges, e) == pytest.approx(0.6, abs=0.05)


@given(st.integers(0, 2**32 - 1), st.floats(5, 40), st.floats(0.3, 1.0), st.floats(0, math.pi))
def test_rim_occlusion_in_unit_interval(seed, a, ratio, theta):
    rng = np.random.default_rng(seed)
    edges = rng.random((100, 100)) < rng.random()
    e = Ellipse.normalized(50, 50, a, a * ratio, theta)
    assert 0.0 <= rim_occlusion(edges, e) <= 1.0


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_classify_empty_and_full(seed):
    empty = render_bin_view(seed, full=False)
    full = render_bin_view(seed, full=True)
    assert classify(empty.frame, BinROI(*empty.roi)).state is BinState.EMPTY
    assert classify(full.frame, BinROI(*full.roi)).state is BinState.FULL


def test_classify_deterministic():
    v = render_bin_view(30, full=True)
    assert classify(v.frame, BinROI(*v.roi)) == classify(v.frame, BinROI(*v.roi))


def _shift_value(frame, delta):
    # Move V by delta while keeping hue and saturation: scale the RGB triple.
    f = frame.astype(np.float64)
    v = f.max(axis=2, keepdims=True)
    scale = np.where(v > 0, (v + delta) / np.maximum(v, 1), 1.0)
    return np.clip(np.rint(f * scale), 0, 255).astype(np.uint8)


@pytest.mark.parametrize("seed,full", [(40, False), (41, True), (42, False), (43, True)])
@pytest.mark.parametrize("delta", [-30, 30])
def test_verdict_invariant_to_brightness(seed, full, delta):
    v = render_bin_view(seed, full=full, noise=0.0)
    roi = BinROI(*v.roi)
    assert classify(_shift_value(v.frame, delta), roi).state == classify(v.frame, roi).state


@pytest.mark.parametrize("seed", [50, 51, 52])
def test_adding_clutter_keeps_full(seed):
    v = render_bin_view(seed, full=True)
    roi = BinROI(*v.roi)
    before = classify(v.frame, roi)
    assert before.state is BinState.FULL
    rng = np.random.default_rng(seed)
    inner = interior_mask(Ellipse(before.ellipse.cx, before.ellipse.cy, before.ellipse.a * 0.6, before.ellipse.b * 0.5, before.ellipse.theta), v.frame.shape[:2])
    frame = v.frame.copy()
    ys, xs = np.nonzero(inner)
    frame[ys, xs] = rng.integers(0, 256, (len(ys), 3), dtype=np.uint8)
    assert classify(frame, roi).state is BinState.FULL


def test_classify_frame_and_roi_json():
    v = render_bin_view(60, full=False)
    rois = load_rois({"b": dict(zip("xywh", v.roi))})
    assert rois_to_json(rois) == {"b": dict(zip("xywh", v.roi))}
    out = classify_frame(v.frame, rois)
    assert out["b"].state is BinState.EMPTY
    j = out["b"].to_json()
    assert set(j) >= {"state", "interior_std", "rim_fraction", "ellipse"}
