import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentinel.detection import (
    DEFAULT_RESOLUTIONS,
    DetectionBox,
    ManifestError,
    TileDetectionError,
    benchmark,
    detect_sliced,
    detect_whole,
    iou,
    nms,
    plan_tiles,
    reference_detector,
    tiles_per_axis,
    timing_table,
)
from sentinel.synth import LITTER_CLASSES, litter_manifest, random_litter_scene, render_litter_frame

# -- tiling ------------------------------------------------------------------


@pytest.mark.parametrize(
    "w,h,tile,overlap,expected",
    [(1920, 1080, 640, 128, 8), (640, 480, 640, 128, 1), (800, 600, 400, 0, 4)],
)
def test_tile_counts(w, h, tile, overlap, expected):
    assert len(plan_tiles(w, h, tile, overlap).tiles) == expected


def test_zero_overlap_tiles():
    plan = plan_tiles(800, 600, 400, 0)
    assert len(plan.tiles) == 4
    cover = np.zeros((600, 800), int)
    for x, y, tw, th in plan.tiles:
        cover[y : y + th, x : x + tw] += 1
    assert (cover >= 1).all()
    # 800 = 2 x 400 partitions exactly; 600 cannot, so the flush last row
    # overlaps the first by 200 px.
    assert sorted({t[0] for t in plan.tiles}) == [0, 400]
    assert sorted({t[1] for t in plan.tiles}) == [0, 200]
    assert (cover[:, :][:200] == 1).all() and (cover[400:] == 1).all()


def test_tile_plan_errors():
    with pytest.raises(ValueError):
        plan_tiles(1000, 1000, 300, 300)
    with pytest.raises(ValueError):
        plan_tiles(100, 100, 300, 10)


def _axis_oracle(dim, tile, overlap):
    if dim <= tile:
        return 1
    return -(-(dim - tile) // (tile - overlap)) + 1


@given(st.integers(1, 700), st.integers(1, 700), st.integers(16, 300), st.data())
def test_tile_plan_properties(w, h, tile, data):
    if tile > max(w, h):
        tile = max(w, h)
    overlap = data.draw(st.integers(0, tile - 1))
    plan = plan_tiles(w, h, tile, overlap)
    assert len(plan.tiles) == _axis_oracle(w, tile, overlap) * _axis_oracle(h, tile, overlap)
    cover = np.zeros((h, w), bool)
    for x, y, tw, th in plan.tiles:
        assert 0 <= x and 0 <= y and x + tw <= w and y + th <= h
        cover[y : y + th, x : x + tw] = True
    assert cover.all()
    xs = sorted({t[0] for t in plan.tiles})
    for a, b in zip(xs[:-2], xs[1:-1]):
        assert b - a == tile - overlap
    if len(xs) > 1:
        assert xs[-1] + tile == w


# -- boxes and NMS -----------------------------------------------------------


def test_box_validation():
    with pytest.raises(ValueError):
        DetectionBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        DetectionBox(0, 0, 5, 5, 0, 1.5)


def test_iou_values():
    a = DetectionBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, DetectionBox(20, 20, 5, 5)) == 0.0
    assert iou(a, DetectionBox(5, 0, 10, 10)) == pytest.approx(50 / 150)


box_st = st.builds(
    DetectionBox,
    st.integers(0, 60).map(float),
    st.integers(0, 60).map(float),
    st.integers(1, 30).map(float),
    st.integers(1, 30).map(float),
    st.integers(0, 2),
    st.floats(0.0, 1.0),
)


@given(st.lists(box_st, max_size=25), st.floats(0.05, 0.95))
def test_nms_leaves_no_overlapping_pair(boxes, thr):
    kept = nms(boxes, thr)
    for i, a in enumerate(kept):
        for b in kept[i + 1 :]:
            assert a.class_id != b.class_id or iou(a, b) < thr


@given(st.lists(box_st, max_size=20), st.randoms())
def test_nms_order_independent(boxes, rnd):
    shuffled = list(boxes)
    rnd.shuffle(shuffled)
    assert nms(boxes, 0.5) == nms(shuffled, 0.5)


# -- sliced detection --------------------------------------------------------


class EchoDetector:
    """Returns boxes stored per tile origin, looked up via pixel markers."""

    native_size = (100, 100)
    concurrent_safe = True

    def __init__(self, boxes):
        self.boxes = boxes  # frame-coordinate boxes

    def detect(self, image):
        # Tile offset is encoded in the first pixel of the tile.
        x0, y0 = int(image[0, 0, 0]) * 10, int(image[0, 0, 1]) * 10
        th, tw = image.shape[:2]
        out = []
        for b in self.boxes:
            if b.x >= x0 and b.y >= y0 and b.x2 <= x0 + tw and b.y2 <= y0 + th:
                out.append(b.shifted(-x0, -y0))
        return out


def _encoded_frame(w, h, plan):
    f = np.zeros((h, w, 3), np.uint8)
    for x, y, _, _ in plan.tiles:
        f[y, x] = (x // 10, y // 10, 0)
    return f


def test_overlapping_tiles_collapse_duplicate():
    plan = plan_tiles(200, 100, 100, 50)
    box = DetectionBox(60, 20, 20, 20, 0, 0.9)  # inside tiles at x=0, 50
    dets = detect_sliced(_encoded_frame(200, 100, plan), EchoDetector([box]), plan, 0.5)
    assert dets == [box]


def test_empty_tiles_give_empty_output():
    plan = plan_tiles(200, 100, 100, 50)
    assert detect_sliced(np.zeros((100, 200, 3), np.uint8), EchoDetector([]), plan, 0.5) == []


class Outside:
    native_size = (50, 50)
    concurrent_safe = False

    def detect(self, image):
        h, w = image.shape[:2]
        return [DetectionBox(-5, -5, 20, 20, 0, 0.5), DetectionBox(w - 10, h - 10, 30, 30, 1, 0.6)]


def test_sliced_boxes_clamped_to_frame():
    plan = plan_tiles(130, 90, 50, 10)
    for b in detect_sliced(np.zeros((90, 130, 3), np.uint8), Outside(), plan, 0.5):
        assert b.x >= 0 and b.y >= 0 and b.x2 <= 130 and b.y2 <= 90


def test_single_full_tile_without_merge_equals_direct_call():
    frame, _ = random_litter_scene(320, 240, 6, (8, 14), seed=3)
    det = reference_detector(litter_manifest())
    plan = plan_tiles(320, 240, 320, 0)
    direct = sorted(det.detect(frame), key=lambda b: (-b.confidence, b.x, b.y, b.w, b.h, b.class_id))
    assert detect_sliced(frame, det, plan, merge_iou=None) == direct


class Failing:
    native_size = (50, 50)
    concurrent_safe = False

    def detect(self, image):
        if image[0, 0, 0] == 1:
            raise RuntimeError("boom")
        return []


def test_tile_failure_aborts_with_report():
    plan = plan_tiles(100, 50, 50, 0)
    frame = np.zeros((50, 100, 3), np.uint8)
    frame[0, 50, 0] = 1
    with pytest.raises(TileDetectionError) as info:
        detect_sliced(frame, Failing(), plan, 0.5)
    assert info.value.failures[0][0] == (50, 0, 50, 50)


def test_threaded_tiles_match_sequential():
    frame, _ = random_litter_scene(1400, 900, 15, (8, 16), seed=5)
    det = reference_detector(litter_manifest())
    plan = plan_tiles(1400, 900)
    assert detect_sliced(frame, det, plan, workers=4) == detect_sliced(frame, det, plan, workers=1)


def test_merge_iou_bounds():
    plan = plan_tiles(100, 100, 100, 0)
    with pytest.raises(ValueError):
        detect_sliced(np.zeros((100, 100, 3), np.uint8), Outside(), plan, 1.0)


# -- whole-frame baseline and reference detector -----------------------------


def test_whole_frame_centre_blob_maps_back():
    w, h = 1280, 720
    frame = render_litter_frame(w, h, [(620, 340, 40, 0)], noise=0)
    boxes = detect_whole(frame, reference_detector(litter_manifest()))
    assert len(boxes) == 1
    cx, cy = boxes[0].center
    assert math.hypot(cx - 640, cy - 360) <= 2
    assert detect_whole(frame, reference_detector(litter_manifest())) == boxes


def test_reference_detector_single_blob_and_empty():
    det = reference_detector(litter_manifest())
    frame = render_litter_frame(640, 640, [(100, 200, 30, 0)], noise=0)
    (b,) = det.detect(frame)
    assert b.class_id == 0 and iou(b, DetectionBox(100, 200, 30, 30)) > 0.9
    assert det.detect(render_litter_frame(640, 640, [], noise=0)) == []
    assert detect_whole(render_litter_frame(800, 600, [], noise=0), det) == []


def test_subpixel_blob_missed_whole_found_sliced():
    w, h = 3840, 2160
    # At 6x downscale a 4 px blob shrinks below one native pixel.
    frame = render_litter_frame(w, h, [(1900, 1000, 4, 1)], noise=0)
    det = reference_detector(litter_manifest(), min_area=1)
    assert detect_whole(frame, det) == []
    found = detect_sliced(frame, det, plan_tiles(w, h))
    assert len(found) == 1 and iou(found[0], DetectionBox(1900, 1000, 4, 4, 1)) >= 0.5


@pytest.mark.parametrize("bad", [{}, {"classes": [{"id": 0}]}, {"classes": "red"}, {"classes": []}])
def test_malformed_manifest(bad):
    with pytest.raises(ManifestError):
        reference_detector(bad)


def test_manifest_from_file(tmp_path):
    import json

    p = tmp_path / "m.json"
    p.write_text(json.dumps({"classes": LITTER_CLASSES, "detector": {"tolerance": 30}}))
    assert reference_detector(p).tolerance == 30
    with pytest.raises(ManifestError):
        reference_detector(tmp_path / "missing.json")


# -- benchmark ---------------------------------------------------------------


def test_benchmark_shape_and_invocations():
    det = reference_detector(litter_manifest())
    res = [(640, 480), (1280, 720)]
    whole = benchmark(det, res, False, 3)
    sliced = benchmark(det, res, True, 3)
    assert len(whole) == len(sliced) == 2
    assert [r.invocations for r in whole] == [1, 1]
    assert sliced[0].invocations < sliced[1].invocations
    assert all(r.n_runs == 3 and r.mean_ms > 0 for r in whole + sliced)
    # Several tiles cost more detector time than one resized frame.
    assert sliced[1].mean_ms >= whole[1].mean_ms
    table = timing_table({"a": (whole, sliced), "b": (whole, sliced)})
    lines = table.strip().splitlines()
    assert len(lines) == 3 + 2
    assert all(line.count("|") == 6 for line in lines)


def test_benchmark_requires_three_runs():
    with pytest.raises(ValueError):
        benchmark(reference_detector(litter_manifest()), [(640, 480)], False, 2)


def test_default_resolutions():
    assert len(DEFAULT_RESOLUTIONS) == 6
    counts = [tiles_per_axis(w, 640, 128) * tiles_per_axis(h, 640, 128) for w, h in DEFAULT_RESOLUTIONS]
    assert counts == sorted(counts) and len(set(counts)) == 6
