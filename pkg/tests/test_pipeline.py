import json
import shutil

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentinel.pipeline import (
    EXIT_OK,
    EXIT_PIPELINE_ERROR,
    ConfigError,
    EvaluationError,
    RunConfig,
    evaluate,
    load_json,
    manifest_as_report,
    mask_to_rle,
    read_report,
    rle_to_mask,
    run,
    write_report,
)


def cfg(input_dir, *pipelines, **blocks):
    return RunConfig(input=input_dir, pipelines=list(pipelines), **blocks)


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_zero_pipelines():
    res = run(RunConfig())
    assert res.exit_code == EXIT_OK
    assert [r["type"] for r in res.records] == ["header", "summary"]
    assert res.records[-1]["status"] == "ok"
    assert all(r["format_version"] for r in res.records)


def test_bins_and_stains_match_manifest(bins_scene_dir):
    res = run(cfg(bins_scene_dir, "stains", "bins"))
    assert res.exit_code == EXIT_OK
    m = evaluate(res.records, manifest(bins_scene_dir), bins_scene_dir)
    assert m["bin_accuracy"] == 1.0
    assert m["stain_iou"] >= 0.7
    assert m["precision"] is None and m["mapping_rms_m"] is None


def test_demo_litter_and_mapping(demo_dir):
    res = run(cfg(demo_dir, "litter", "mapping"))
    m = evaluate(res.records, demo_dir / "manifest.json")
    assert m["precision"] >= 0.9 and m["recall"] >= 0.9
    assert m["mapping_matched"] == m["mapping_truth"] == 6
    assert m["mapping_rms_m"] <= 0.15
    frame = res.records[1]
    assert frame["mapping"]["calibrated"] and len(frame["mapping"]["distances_cm"]) == 1


def test_unreadable_frame_is_partial(demo_dir, tmp_path):
    for p in demo_dir.iterdir():
        if p.suffix == ".png":
            shutil.copy(p, tmp_path / p.name)
    (tmp_path / "frame_0001.png").write_bytes(b"not an image")
    res = run(cfg(tmp_path, "stains"))
    assert res.exit_code == EXIT_PIPELINE_ERROR
    summary = res.records[-1]
    assert summary["status"] == "partial" and summary["frames_processed"] == 1
    assert summary["errors"][0]["frame"] == "frame_0001.png"


def test_deterministic_and_section_independent(demo_dir):
    a = run(cfg(demo_dir, "litter", "bins"))
    b = run(cfg(demo_dir, "bins", "litter"))
    assert a.text == b.text
    alone = run(cfg(demo_dir, "litter"))
    for x, y in zip(alone.records, a.records):
        if x["type"] == "frame":
            assert x["litter"] == y["litter"]


def test_report_round_trip(tmp_path):
    res = run(RunConfig())
    path = write_report(res, tmp_path / "r" / "report.jsonl")
    assert read_report(path) == json.loads("[" + ",".join(res.text.splitlines()) + "]")


def test_evaluate_fixed_point(demo_dir):
    man = manifest(demo_dir)
    m = evaluate(manifest_as_report(man, demo_dir), man, demo_dir)
    assert m["precision"] == m["recall"] == m["stain_iou"] == m["bin_accuracy"] == 1.0
    assert m["mapping_rms_m"] == 0.0


def test_evaluate_empty_report_zero_recall(demo_dir):
    man = manifest(demo_dir)
    rep = manifest_as_report(man)
    for r in rep[1:]:
        r["litter"] = []
    assert evaluate(rep, man)["recall"] == 0.0


def test_evaluate_perturbed_box(demo_dir):
    man = manifest(demo_dir)
    rep = manifest_as_report(man)
    n = sum(len(r["litter"]) for r in rep[1:])
    box = rep[1]["litter"][0]
    box["x"] += 2 * box["w"]
    m = evaluate(rep, man)
    assert m["precision"] == pytest.approx((n - 1) / n)


def test_evaluate_frame_mismatch(demo_dir):
    man = manifest(demo_dir)
    rep = manifest_as_report(man)
    with pytest.raises(EvaluationError):
        evaluate(rep[:-1], man)
    rep[1]["frame"] = "other.png"
    with pytest.raises(EvaluationError):
        evaluate(rep, man)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_rle_round_trip(h, w, seed):
    mask = np.random.default_rng(seed).random((h, w)) < 0.4
    rle = mask_to_rle(mask)
    assert sum(rle["counts"]) == h * w
    assert np.array_equal(rle_to_mask(rle), mask)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(pipelines=["bins", "weather"])
    with pytest.raises(ConfigError):
        RunConfig(pipelines=["bins", "bins"])
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"pipelines": [], "colour": 1})
    with pytest.raises(ConfigError):
        run(RunConfig(pipelines=["stains"]))
    with pytest.raises(ConfigError):
        run(RunConfig(input=tmp_path / "missing", pipelines=["stains"]))


def test_config_json_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "pipelines": [\n    "bins",\n  ]\n}\n')
    with pytest.raises(ConfigError, match=r"bad\.json:4:\d+"):
        load_json(p, "config")


def test_config_paths_relative_to_file(tmp_path):
    (tmp_path / "sub").mkdir()
    p = tmp_path / "sub" / "run.json"
    p.write_text(json.dumps({"input": "frames", "pipelines": ["stains"], "stains": {"thr_S": 50}}))
    c = RunConfig.load(p)
    assert c.input == tmp_path / "sub" / "frames"
    assert c.stains == {"thr_S": 50}


def test_coverage_section(tmp_path):
    scene = {"bounds": {"min": [0, 0, 0], "max": [4, 3, 4]}, "occluders": []}
    cams = [{"position": [-0.5, 2.5, -0.5], "yaw": 0.785, "pitch": -0.5, "hfov": 2.0, "vfov": 2.0}]
    res = run(RunConfig(pipelines=["coverage"], coverage={"scene": scene, "cameras": cams, "spacing": 1.0}))
    (cov,) = [r for r in res.records if r["type"] == "coverage"]
    assert cov["n_probes"] == 25 and cov["coverage_ratio"] == 1.0 and cov["blind"] == []
    with pytest.raises(ConfigError):
        run(RunConfig(pipelines=["coverage"], coverage={"scene": scene}))
