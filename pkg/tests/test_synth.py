import json
import logging
import math

import numpy as np
import pytest

from sentinel.coverage import CameraPose
from sentinel.synth import (
    LITTER_CLASSES,
    SceneItem,
    SceneSpec,
    demo_scene,
    random_litter_scene,
    render_bin_view,
    render_scene_frame,
    synthesize,
)

CAM = CameraPose((0.0, 3.0, 0.0), 0.0, -0.5, math.radians(70), math.radians(42))


def spec_with(*items, noise=0.0):
    return SceneSpec(CAM, (640, 360), list(items), noise=noise)


def test_same_seed_byte_identical(tmp_path):
    spec = demo_scene((480, 270))
    synthesize(spec, 2, 7, tmp_path / "a")
    synthesize(spec, 2, 7, tmp_path / "b")
    for name in ("frame_0000.png", "frame_0001.png", "manifest.json", "masks/frame_0001.pgm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seed_changes_noise():
    spec = demo_scene((320, 180))
    a, _ = synthesize(spec, 1, 1)
    b, _ = synthesize(spec, 1, 2)
    assert not np.array_equal(a[0], b[0])


def test_litter_area_decreases_with_distance():
    areas = []
    for x in (3.0, 4.0, 5.0, 6.5, 8.0, 10.0):
        _, truth, _ = render_scene_frame(spec_with(SceneItem("litter_blob", x, 0.0, {"size": 0.3, "class": 0})), 0, 0)
        (b,) = truth["boxes"]
        areas.append(b["w"] * b["h"])
    assert all(b < a for a, b in zip(areas, areas[1:]))


def test_empty_spec_blank_floor():
    images, manifest = synthesize(spec_with(), 2, 0)
    for fr in manifest["frames"]:
        assert fr["boxes"] == fr["bins"] == fr["people"] == fr["markers"] == fr["offscreen"] == []
        assert fr["stain_pixels"] == 0
    colors = np.array([c["color"] for c in LITTER_CLASSES])
    img = images[0].reshape(-1, 3)
    assert not any(np.all(img == c, axis=1).any() for c in colors)


def test_offscreen_item_warned_and_recorded(caplog):
    spec = spec_with(SceneItem("litter_blob", -4.0, 0.0, {"size": 0.2, "id": "behind"}))
    with caplog.at_level(logging.WARNING):
        _, manifest = synthesize(spec, 1, 0)
    assert manifest["frames"][0]["offscreen"] == ["behind"]
    assert "behind" in caplog.text


def test_spec_json_round_trip():
    spec = demo_scene()
    again = SceneSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert again.to_json() == spec.to_json()
    with pytest.raises(ValueError):
        SceneItem("tree", 0, 0)
    with pytest.raises(ValueError):
        synthesize(spec, 0, 0)


def test_people_move_per_frame():
    spec = spec_with(SceneItem("person_silhouette", 5.0, 0.0, {"vx": 0.1, "vz": 0.0, "id": "p"}))
    _, manifest = synthesize(spec, 3, 0)
    xs = [fr["people"][0]["x"] for fr in manifest["frames"]]
    assert xs == pytest.approx([5.0, 5.1, 5.2])


def test_demo_manifest_contents():
    _, manifest = synthesize(demo_scene(), 1, 0)
    fr = manifest["frames"][0]
    assert {b["bin_id"]: b["state"] for b in fr["bins"]} == {"bin_a": "Empty", "bin_b": "Full"}
    assert len(fr["boxes"]) == 3 and len(fr["people"]) == 2
    assert sorted(manifest["markers"]) == ["0", "1", "2", "3"]
    assert fr["stain_pixels"] > 0


def test_random_litter_scene_boxes():
    frame, boxes = random_litter_scene(400, 300, n_blobs=10, seed=3)
    assert frame.shape == (300, 400, 3) and len(boxes) == 10
    assert all(8 <= b.w <= 16 and b.w == b.h for b in boxes)


def test_bin_view_truth_inside_roi():
    v = render_bin_view(3, full=True)
    x, y, w, h = v.roi
    assert x <= v.ellipse.cx < x + w and y <= v.ellipse.cy < y + h
