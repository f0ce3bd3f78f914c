"""``sentinel`` command-line entry point.

Exit codes: 0 success, 1 pipeline error, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .pipeline import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_PIPELINE_ERROR,
    ConfigError,
    EvaluationError,
    RunConfig,
    dumps_report,
    evaluate,
    load_json,
    run,
    write_report,
)

log = logging.getLogger("sentinel")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _emit(lines: list[str], out: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out:
        p = Path(out)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    else:
        sys.stdout.write(text)


def _config_block(args, name: str) -> dict:
    if not args.config:
        return {}
    cfg = load_json(args.config, "config")
    block = cfg.get(name, {}) if isinstance(cfg, dict) else {}
    return block if isinstance(block, dict) else {}


def _params_arg(args, name: str) -> dict:
    if getattr(args, "params", None):
        return load_json(args.params, "params")
    return _config_block(args, name).get("params", {})


def _frames(path: str):
    from .imaging.io import list_frames

    p = Path(path)
    if p.is_dir():
        frames = list_frames(p)
    elif p.is_file():
        frames = [p]
    else:
        raise ConfigError(f"{path}: no such file or directory")
    if not frames:
        raise ConfigError(f"{path}: no image frames found")
    return frames


def _resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    from .synth import SceneSpec, demo_scene, synthesize

    if args.spec:
        spec = SceneSpec.from_json(load_json(args.spec, "scene spec"))
    else:
        spec = demo_scene(args.resolution)
    out = Path(args.out or "synth_out")
    _, manifest = synthesize(spec, args.frames, args.seed or 0, out)
    offscreen = sorted({i for f in manifest["frames"] for i in f["offscreen"]})
    print(_dump({"out": str(out), "frames": args.frames, "offscreen": offscreen}))
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run requires --config")
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.input:
        config.input = Path(args.input)
    if args.out:
        config.output = Path(args.out)
    result = run(config)
    out = config.output or Path("run_out")
    path = write_report(result, Path(out) / "report.jsonl")
    summary = result.records[-1]
    print(_dump({"report": str(path), "status": summary["status"], "errors": summary["errors"]}))
    return result.exit_code


def cmd_eval(args) -> int:
    metrics = evaluate(args.report, args.manifest)
    _emit([_dump({"format_version": FORMAT_VERSION, **metrics})], args.out)
    return EXIT_OK


def _scene_and_grid(args):
    from .coverage import Scene, generate_probes

    scene = Scene.from_json(load_json(args.scene, "scene"))
    return scene, generate_probes(scene, args.spacing, args.probe_height)


def _cameras(path: str):
    from .pipeline import load_cameras_from

    return load_cameras_from(load_json(path, "cameras"))


def cmd_coverage(args) -> int:
    from .coverage import coverage

    scene, grid = _scene_and_grid(args)
    rep = coverage(_cameras(args.cameras), grid, scene)
    body = rep.to_json()
    body["blind_probes"] = [[round(float(v), 6) for v in grid.points[i]] for i in rep.blind]
    _emit([_dump({"format_version": FORMAT_VERSION, **body})], args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    from .coverage import suggest_placement

    scene, grid = _scene_and_grid(args)
    res = suggest_placement(scene, grid, _cameras(args.candidates), args.target)
    _emit([_dump({"format_version": FORMAT_VERSION, **res.to_json()})], args.out)
    if res.shortfall:
        log.warning("target %.3f not reached: best effort covers %.3f", args.target, res.coverage_ratio)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .imaging.io import read_image
    from .mapping import CalibrationError, calibrate, detect_fiducials, load_marker_world

    frame = read_image(args.frame)
    world = load_marker_world(load_json(args.markers, "marker world"))
    obs = detect_fiducials(frame)
    try:
        h = calibrate(obs, world)
    except CalibrationError as exc:
        log.error("calibration failed: %s (markers seen: %s)", exc, sorted(o.marker_id for o in obs))
        return EXIT_PIPELINE_ERROR
    body = {"format_version": FORMAT_VERSION, **h.to_json(), "markers": [o.to_json() for o in obs]}
    _emit([json.dumps(body, sort_keys=True, indent=1)], args.out)
    return EXIT_OK


def _read_jsonl(path: str) -> list[dict]:
    from .pipeline import read_report

    return read_report(path)


def cmd_map(args) -> int:
    from .detection.boxes import DetectionBox
    from .mapping import Homography, HorizonError, TrackHistory, map_to_floor, update_tracks

    h = Homography.from_json(load_json(args.homography, "homography"))
    history = TrackHistory()
    skipped = 0
    for index, rec in enumerate(_read_jsonl(args.detections)):
        idx = int(rec.get("index", index))
        mapped = []
        for b in rec.get("boxes", []):
            try:
                mapped.append(map_to_floor(h, DetectionBox.from_json(b), idx))
            except HorizonError:
                skipped += 1
        history = update_tracks(history, mapped, args.max_assoc)
    if skipped:
        log.warning("%d boxes above the horizon were skipped", skipped)
    _emit([_dump({"format_version": FORMAT_VERSION, **r}) for r in history.to_records()], args.out)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    from .imaging.io import write_image
    from .mapping import TrackHistory, to_floor_map

    history = TrackHistory.from_records(_read_jsonl(args.tracks))
    if args.bounds:
        x0, y0, x1, y1 = (float(v) for v in args.bounds.split(","))
    else:
        pts = [p for s in history.tracks.values() for _, p in s]
        if not pts:
            raise ConfigError(f"{args.tracks}: no track samples; pass --bounds for an empty map")
        xs, ys = zip(*pts)
        x0, y0 = math.floor(min(xs)), math.floor(min(ys))
        x1, y1 = math.floor(max(xs)) + 1, math.floor(max(ys)) + 1
    fmap = to_floor_map(history, ((x0, y0), (x1, y1)), args.cell)
    out = Path(args.out or "heatmap.pgm")
    out.parent.mkdir(parents=True, exist_ok=True)
    # Row 0 holds the smallest y; flip so the image reads like a plan view.
    write_image(out, np.ascontiguousarray(fmap.to_image()[::-1]))
    print(_dump({"out": str(out), "shape": list(fmap.counts.shape), "hottest": fmap.hottest(5)}))
    return EXIT_OK


def cmd_bins(args) -> int:
    from .bins import OccupancyParams, classify, load_rois
    from .imaging.io import read_image

    rois_src = args.rois or _config_block(args, "bins").get("rois")
    if rois_src is None:
        raise ConfigError("bins requires --rois")
    rois = load_rois(load_json(rois_src, "rois") if isinstance(rois_src, str) else rois_src)
    params = dict(_params_arg(args, "bins"))
    if args.seed is not None:
        params["seed"] = args.seed
    p = OccupancyParams.from_dict(params)
    lines = []
    status = EXIT_OK
    for path in _frames(args.input):
        try:
            frame = read_image(path)
        except Exception as exc:
            log.error("cannot read %s: %s", path, exc)
            status = EXIT_PIPELINE_ERROR
            break
        for bin_id in sorted(rois):
            v = classify(frame, rois[bin_id], p)
            lines.append(_dump({"format_version": FORMAT_VERSION, "frame": path.name, "bin_id": bin_id, **v.to_json()}))
    _emit(lines, args.out)
    return status


def cmd_stains(args) -> int:
    from .imaging.io import read_image, write_mask
    from .stains import StainParams, StainTracker

    tracker = StainTracker(StainParams.from_dict(_params_arg(args, "stains")))
    lines = []
    status = EXIT_OK
    if args.masks:
        Path(args.masks).mkdir(parents=True, exist_ok=True)
    for index, path in enumerate(_frames(args.input)):
        try:
            frame = read_image(path)
        except Exception as exc:
            log.error("cannot read %s: %s", path, exc)
            status = EXIT_PIPELINE_ERROR
            break
        _, blobs = tracker.push(frame)
        if args.masks:
            write_mask(Path(args.masks) / f"{path.stem}.pgm", tracker.state.active)
        lines.append(
            _dump({"format_version": FORMAT_VERSION, "frame": path.name, "index": index, "blobs": [b.to_json() for b in blobs]})
        )
    _emit(lines, args.out)
    return status


def _detector(args, block: str = "litter"):
    from .detection import reference_detector
    from .synth import litter_manifest

    src = args.classes or _config_block(args, block).get("detector")
    return reference_detector(src if src is not None else litter_manifest())


def cmd_detect(args) -> int:
    from .detection import detect_sliced, detect_whole, plan_tiles
    from .imaging.io import read_image

    det = _detector(args)
    lines = []
    for index, path in enumerate(_frames(args.input)):
        frame = read_image(path)
        if args.no_slice:
            boxes = detect_whole(frame, det)
        else:
            h, w = frame.shape[:2]
            tile = min(args.tile, max(w, h))
            boxes = detect_sliced(frame, det, plan_tiles(w, h, tile, min(args.overlap, tile - 1)), args.iou)
        lines.append(_dump({"format_version": FORMAT_VERSION, "frame": path.name, "index": index, "boxes": [b.to_json() for b in boxes]}))
    _emit(lines, args.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .detection import DEFAULT_RESOLUTIONS, benchmark, reference_detector, timing_table
    from .synth import litter_manifest

    resolutions = args.resolutions or DEFAULT_RESOLUTIONS
    manifest = load_json(args.classes, "classes") if args.classes else litter_manifest()
    results = {}
    records = []
    for size in args.native:
        name = f"ref-{size}"
        det = reference_detector(manifest, native_size=(size, size))
        whole = benchmark(det, resolutions, False, args.runs, args.tile, args.overlap, seed=args.seed or 0)
        sliced = benchmark(det, resolutions, True, args.runs, args.tile, args.overlap, seed=args.seed or 0)
        results[name] = (whole, sliced)
        records += [{"model": name, **r.to_json()} for r in whole + sliced]
    table = timing_table(results)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table)
        out.with_suffix(".jsonl").write_text("".join(_dump(r) + "\n" for r in records))
    sys.stdout.write(table)
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand's unset flag from clobbering a value given
    # before the subcommand name; main() fills in the defaults afterwards.
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument(
        "--out", default=argparse.SUPPRESS, help="output directory (synth, run) or file (other commands); stdout if omitted"
    )
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="sentinel", description="Cleanliness-monitoring vision toolkit", parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "render a synthetic scene with a ground-truth manifest")
    p.add_argument("--spec", help="scene spec JSON (default: built-in demo scene)")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--resolution", type=_resolution, default=(960, 540), help="WxH for the demo scene")

    p = add("run", cmd_run, "run the configured pipelines and write report.jsonl")
    p.add_argument("--input", help="override the configured input directory")

    p = add("eval", cmd_eval, "score a report against a manifest")
    p.add_argument("--report", required=True)
    p.add_argument("--manifest", required=True)

    for name, func, help_ in (("coverage", cmd_coverage, "probe coverage of a camera set"), ("plan", cmd_plan, "greedy camera placement")):
        p = add(name, func, help_)
        p.add_argument("--scene", required=True)
        p.add_argument("--spacing", type=float, default=1.0)
        p.add_argument("--probe-height", type=float, default=0.1)
        if name == "coverage":
            p.add_argument("--cameras", required=True)
        else:
            p.add_argument("--candidates", required=True)
            p.add_argument("--target", type=float, default=1.0)

    p = add("calibrate", cmd_calibrate, "fit the image-to-floor homography from fiducials")
    p.add_argument("--frame", required=True)
    p.add_argument("--markers", required=True, help="marker world JSON {id: {x, y[, size, yaw]}}")

    p = add("map", cmd_map, "map detections to the floor and build tracks")
    p.add_argument("--homography", required=True)
    p.add_argument("--detections", required=True, help="JSONL from 'detect'")
    p.add_argument("--max-assoc", type=float, default=1.0)

    p = add("heatmap", cmd_heatmap, "rasterise tracks into a visit-count map")
    p.add_argument("--tracks", required=True)
    p.add_argument("--cell", type=float, default=0.1)
    p.add_argument("--bounds", help="xmin,ymin,xmax,ymax in metres (default: track extent)")

    p = add("bins", cmd_bins, "classify bins as Full/Empty")
    p.add_argument("--input", required=True)
    p.add_argument("--rois", help="ROI JSON {bin_id: {x, y, w, h}}")
    p.add_argument("--params")

    p = add("stains", cmd_stains, "segment and track water stains")
    p.add_argument("--input", required=True)
    p.add_argument("--params")
    p.add_argument("--masks", help="directory for per-frame active-mask PGMs")

    p = add("detect", cmd_detect, "litter detection with or without slicing")
    p.add_argument("--input", required=True)
    p.add_argument("--classes", help="detector manifest JSON {classes: [{id, color}]}")
    p.add_argument("--tile", type=int, default=640)
    p.add_argument("--overlap", type=int, default=128)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--no-slice", action="store_true")

    p = add("benchmark", cmd_benchmark, "detector latency table across resolutions")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--resolutions", type=_resolution, nargs="+")
    p.add_argument("--native", type=int, nargs="+", default=[640, 1280], help="native input sizes, one column per size")
    p.add_argument("--classes")
    p.add_argument("--tile", type=int, default=640)
    p.add_argument("--overlap", type=int, default=128)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG_ERROR if exc.code not in (0, None) else EXIT_OK
    for name, default in (("config", None), ("seed", None), ("out", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, EvaluationError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG_ERROR
    except (OSError, KeyError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
