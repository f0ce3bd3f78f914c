import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import min_cover_size, segment_crosses_box, visible_oracle
from sentinel.coverage import (
    Box3,
    CameraPose,
    Scene,
    coverage,
    generate_probes,
    greedy_cover,
    segment_hits_box,
    suggest_placement,
    visible,
)

ROOM = Scene(Box3((0, 0, 0), (10, 3, 10)))


def cam(x, y, z, yaw, pitch=-0.3, hfov=1.2, vfov=0.9, max_range=50.0):
    return CameraPose((x, y, z), yaw, pitch, hfov, vfov, max_range)


def as_dict(c):
    return c.to_json()


def test_probe_count_empty_room():
    g = generate_probes(ROOM, 1.0)
    assert len(g) == 121
    assert np.allclose(g.points[:, 1], 0.1)
    # raster by x then z
    assert g.points[0, [0, 2]].tolist() == [0, 0] and g.points[1, [0, 2]].tolist() == [0, 1]


def test_probe_spacing_exact():
    g = generate_probes(ROOM, 0.5)
    xs = np.unique(g.points[:, 0])
    assert np.allclose(np.diff(xs), 0.5)


def test_half_occluder_halves_probes():
    scene = Scene(ROOM.bounds, (Box3((0, 0, 0), (4.5, 3, 10)),))
    n = len(generate_probes(scene, 1.0))
    assert abs(n - 121 / 2) <= 11
    assert n == 121 - 5 * 11


def test_probe_on_occluder_boundary_dropped():
    scene = Scene(ROOM.bounds, (Box3((0, 0, 0), (5, 3, 10)),))
    g = generate_probes(scene, 1.0)
    assert g.points[:, 0].min() == 6


def test_spacing_larger_than_room():
    g = generate_probes(ROOM, 25.0)
    assert len(g) == 1 and g.points[0].tolist() == [0, 0.1, 0]


def test_probe_errors():
    with pytest.raises(ValueError):
        generate_probes(ROOM, 0.0)
    with pytest.raises(ValueError):
        Scene(Box3((0, 0, 0), (0, 3, 10)))
    with pytest.raises(ValueError):
        Scene(ROOM.bounds, (Box3((5, 0, 5), (12, 1, 6)),))
    with pytest.raises(ValueError):
        CameraPose((0, 0, 0), 0, 0, math.pi, 1.0)


def test_visible_examples():
    c = cam(0, 1, 0, 0.0, pitch=0.0)
    assert visible(c, (5, 1, 0), ROOM)
    assert not visible(c, (-5, 1, 0), ROOM)
    wall = Scene(Box3((-10, 0, -10), (10, 3, 10)), (Box3((2, 0, -1), (2.2, 3, 1)),))
    assert not visible(c, (5, 1, 0), wall)
    assert visible(c, (1.5, 1, 0), wall)
    assert not visible(cam(0, 1, 0, 0.0, pitch=0.0, max_range=4), (5, 1, 0), ROOM)


def test_segment_box_matches_face_oracle(rng):
    for _ in range(50):
        lo = rng.uniform(-2, 1, 3)
        hi = lo + rng.uniform(0.2, 2, 3)
        box = Box3(tuple(lo), tuple(hi))
        o = rng.uniform(-4, 4, 3)
        targets = rng.uniform(-4, 4, (40, 3))
        got = segment_hits_box(o, targets, box)
        want = [segment_crosses_box(o, t, lo, hi) for t in targets]
        assert got.tolist() == want


def test_axis_parallel_segments():
    box = Box3((0, 0, 0), (1, 1, 1))
    o = np.array([-1.0, 0.5, 0.5])
    t = np.array([[2.0, 0.5, 0.5], [0.5, 0.5, 0.5], [-0.5, 0.5, 0.5]])
    assert segment_hits_box(o, t, box).tolist() == [True, True, False]
    # running along a face grazes it; parallel and outside misses
    graze = np.array([-1.0, 1.0, 0.5])
    assert not segment_hits_box(graze, np.array([[2.0, 1.0, 0.5]]), box)[0]
    above = np.array([-1.0, 1.5, 0.5])
    assert not segment_hits_box(above, np.array([[2.0, 1.5, 0.5]]), box)[0]


def random_scene(rng, n_occ=3):
    occ = []
    for _ in range(n_occ):
        lo = rng.uniform(0.5, 8, 3) * [1, 0, 1]
        size = rng.uniform(0.3, 2.5, 3) * [1, 0, 1] + [0, rng.uniform(0.5, 3), 0]
        occ.append(Box3(tuple(lo), tuple(np.minimum(lo + size, [10, 3, 10]))))
    return Scene(ROOM.bounds, tuple(occ))


def random_camera(rng):
    return cam(*rng.uniform([0, 1, 0], [10, 3, 10]), rng.uniform(-math.pi, math.pi), rng.uniform(-0.9, 0.1),
               rng.uniform(0.5, 2.5), rng.uniform(0.4, 2.0), rng.uniform(4, 15))


@pytest.mark.parametrize("seed", range(4))
def test_visible_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    scene = random_scene(rng)
    grid = generate_probes(scene, 1.0)
    occ = [(o.min, o.max) for o in scene.occluders]
    for _ in range(3):
        c = random_camera(rng)
        rep = coverage([c], grid, scene)
        want = {i for i, p in enumerate(grid.points) if visible_oracle(as_dict(c), p, occ)}
        assert rep.per_camera[0] == want


def test_zero_cameras():
    rep = coverage([], generate_probes(ROOM), ROOM)
    assert rep.coverage_ratio == 0 and len(rep.blind) == 121


def test_corner_camera_sees_everything():
    c = cam(-0.5, 2.5, -0.5, math.pi / 4, pitch=-0.45, hfov=2.0, vfov=2.0)
    rep = coverage([c], generate_probes(ROOM), ROOM)
    assert rep.coverage_ratio == 1.0
    assert set(rep.covered) | set(rep.blind) == set(range(121))


@given(st.integers(0, 2**32 - 1))
def test_coverage_properties(seed):
    rng = np.random.default_rng(seed)
    scene = random_scene(rng, 2)
    grid = generate_probes(scene, 2.0)
    cams = [random_camera(rng) for _ in range(4)]
    reps = [coverage(cams[:k], grid, scene) for k in range(5)]
    ratios = [r.coverage_ratio for r in reps]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    full = reps[-1]
    assert not set(full.covered) & set(full.blind)
    perm = rng.permutation(4)
    shuffled = coverage([cams[i] for i in perm], grid, scene)
    assert shuffled.covered == full.covered and shuffled.blind == full.blind
    # occluder order and removal
    occ = list(scene.occluders)
    rev = Scene(scene.bounds, tuple(reversed(occ)))
    fewer = Scene(scene.bounds, tuple(occ[1:]))
    for c in cams:
        for p in grid.points[:30]:
            v = visible(c, p, scene)
            assert visible(c, p, rev) == v
            if v:
                assert visible(c, p, fewer)


def test_single_candidate_covers_all():
    grid = generate_probes(ROOM)
    good = cam(-0.5, 2.5, -0.5, math.pi / 4, pitch=-0.45, hfov=2.0, vfov=2.0)
    res = suggest_placement(ROOM, grid, [cam(5, 1, 5, 0.0, hfov=0.2), good], 1.0)
    assert res.indices == [1] and not res.shortfall and res.coverage_ratio == 1.0


def test_two_halves_selected_in_index_order():
    sets = [np.array([1, 1, 0, 0], bool), np.array([0, 0, 1, 1], bool)]
    chosen, ratio, _ = greedy_cover(sets, np.ones(4), 1.0)
    assert chosen == [0, 1] and ratio == 1.0


def test_ties_broken_by_index():
    sets = [np.array([0, 0, 1, 1], bool), np.array([1, 1, 0, 0], bool), np.array([1, 1, 0, 0], bool)]
    assert greedy_cover(sets, np.ones(4), 1.0)[0] == [0, 1]


def test_shortfall_flag():
    grid = generate_probes(ROOM)
    res = suggest_placement(ROOM, grid, [cam(5, 1, 5, 0.0, hfov=0.2)], 1.0)
    assert res.shortfall and res.coverage_ratio < 1.0
    with pytest.raises(ValueError):
        suggest_placement(ROOM, grid, [], 0.0)


def test_weights_change_choice():
    sets = [np.array([1, 1, 1, 0], bool), np.array([0, 0, 0, 1], bool)]
    assert greedy_cover(sets, np.array([1, 1, 1, 10.0]), 0.5)[0] == [1]
    assert greedy_cover(sets, np.ones(4), 0.5)[0] == [0]


@given(st.integers(0, 2**32 - 1))
def test_greedy_within_log_bound(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(4, 13)), int(rng.integers(3, 9))
    rows = rng.random((m, n)) < rng.uniform(0.15, 0.5)
    rows[rng.integers(0, m, n), np.arange(n)] = True  # coverable
    chosen, ratio, _ = greedy_cover(list(rows), np.ones(n), 1.0)
    assert ratio == 1.0
    opt = min_cover_size([set(np.nonzero(r)[0]) for r in rows], range(n))
    assert len(chosen) <= (math.log(n) + 1) * opt


def test_scene_json_round_trip(tmp_path):
    scene = random_scene(np.random.default_rng(3))
    p = tmp_path / "scene.json"
    import json

    p.write_text(json.dumps(scene.to_json()))
    assert Scene.load(p) == scene
    c = cam(1, 2, 3, 0.4)
    assert CameraPose.from_json(c.to_json()) == c
