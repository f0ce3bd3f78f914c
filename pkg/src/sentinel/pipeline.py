"""Run configuration, multi-pipeline orchestration and evaluation.

Reports are JSON Lines. The first record is a header, then one ``frame``
record per input frame holding a section per enabled frame pipeline, then
an optional ``coverage`` record and a closing ``summary``. Every record
carries ``format_version`` and is serialised with sorted keys so that equal
inputs give byte-identical files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION
from .bins import BinState, OccupancyParams, load_rois
from .coverage import Scene, coverage as coverage_report, generate_probes, load_cameras, suggest_placement
from .detection.boxes import DetectionBox, iou
from .detection.detector import reference_detector
from .detection.sliced import detect_sliced, detect_whole
from .detection.tiling import plan_tiles
from .imaging.io import list_frames, read_image, read_mask
from .mapping.fiducials import calibrate, detect_fiducials, load_marker_world
from .mapping.homography import CalibrationError, Homography, HorizonError, distance_cm, map_to_floor, relative_to
from .mapping.tracking import TrackHistory, labelled, update_tracks
from .stains import StainParams, StainTracker

log = logging.getLogger(__name__)

PIPELINES = ("bins", "stains", "litter", "mapping", "coverage")
FRAME_PIPELINES = ("bins", "stains", "litter", "mapping")

EXIT_OK, EXIT_PIPELINE_ERROR, EXIT_CONFIG_ERROR = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or incomplete configuration; message carries file/line context."""


def load_json(path: str | Path, what: str = "file"):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read {what}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON in {what}: {exc.msg}") from exc


def _resolve(base: Path | None, value):
    """JSON objects pass through; strings are paths relative to ``base``."""
    if value is None or isinstance(value, (dict, list)):
        return value
    p = Path(value)
    return p if p.is_absolute() or base is None else base / p


@dataclass
class RunConfig:
    input: Path | None = None
    output: Path | None = None
    pipelines: list[str] = field(default_factory=list)
    seed: int = 0
    bins: dict = field(default_factory=dict)
    stains: dict = field(default_factory=dict)
    litter: dict = field(default_factory=dict)
    mapping: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    source: str = "<config>"
    base_dir: Path | None = None

    def __post_init__(self):
        unknown = [p for p in self.pipelines if p not in PIPELINES]
        if unknown:
            raise ConfigError(f"{self.source}: unknown pipeline(s) {unknown}; expected a subset of {list(PIPELINES)}")
        if len(set(self.pipelines)) != len(self.pipelines):
            raise ConfigError(f"{self.source}: duplicate pipeline names")
        # Canonical order so reports do not depend on how the list was written.
        self.pipelines = [p for p in PIPELINES if p in self.pipelines]
        for name in PIPELINES:
            block = getattr(self, name)
            if not isinstance(block, dict):
                raise ConfigError(f"{self.source}: '{name}' block must be a JSON object")

    @classmethod
    def from_dict(cls, d: dict, source: str = "<config>", base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        known = {"input", "output", "pipelines", "seed", *PIPELINES}
        extra = sorted(set(d) - known - {"format_version"})
        if extra:
            raise ConfigError(f"{source}: unknown key(s) {extra}")
        pipelines = d.get("pipelines", [])
        if not isinstance(pipelines, list):
            raise ConfigError(f"{source}: 'pipelines' must be a list")
        try:
            seed = int(d.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError(f"{source}: 'seed' must be an integer") from None
        return cls(
            input=_resolve(base_dir, d.get("input")),
            output=_resolve(base_dir, d.get("output")),
            pipelines=list(pipelines),
            seed=seed,
            bins=d.get("bins", {}),
            stains=d.get("stains", {}),
            litter=d.get("litter", {}),
            mapping=d.get("mapping", {}),
            coverage=d.get("coverage", {}),
            source=source,
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(load_json(path, "config"), str(path), path.parent)

    def path(self, value):
        return _resolve(self.base_dir, value)


# ----------------------------------------------------------------------------
# frame pipelines


def _input_manifest(config: RunConfig) -> dict | None:
    if config.input is None:
        return None
    p = Path(config.input) / "manifest.json"
    return load_json(p, "manifest") if p.exists() else None


def _block_source(config: RunConfig, block: str, key: str, manifest: dict | None, manifest_key: str):
    value = getattr(config, block).get(key)
    if value is None and manifest is not None and manifest_key in manifest:
        return manifest[manifest_key]
    if value is None:
        raise ConfigError(f"{config.source}: {block}.{key} is required (no manifest.json in the input to fall back on)")
    value = config.path(value)
    if isinstance(value, Path):
        return load_json(value, f"{block}.{key}")
    return value


def _params(cls, block: dict, source: str, name: str, **defaults):
    params = dict(defaults)
    params.update(block.get("params", {}))
    try:
        return cls.from_dict(params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {name}.params: {exc}") from exc


class _Bins:
    def __init__(self, config: RunConfig, manifest):
        rois = _block_source(config, "bins", "rois", manifest, "rois")
        try:
            self.rois = load_rois(rois)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{config.source}: bins.rois: {exc}") from exc
        self.params = _params(OccupancyParams, config.bins, config.source, "bins", seed=config.seed)

    def __call__(self, frame, index):
        from .bins import classify

        out = []
        for bin_id in sorted(self.rois):
            v = classify(frame, self.rois[bin_id], self.params)
            out.append({"bin_id": bin_id, **v.to_json()})
        return out


def mask_to_rle(mask: np.ndarray) -> dict:
    """Row-major run lengths, starting with a (possibly empty) run of zeros."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    edges = np.concatenate([[0], change, [flat.size]])
    counts = np.diff(edges).tolist()
    if flat.size and flat[0]:
        counts = [0] + counts
    return {"shape": list(mask.shape), "counts": counts}


def rle_to_mask(rle: dict) -> np.ndarray:
    h, w = rle["shape"]
    flat = np.zeros(h * w, dtype=bool)
    pos, val = 0, False
    for n in rle["counts"]:
        if val:
            flat[pos : pos + n] = True
        pos += n
        val = not val
    return flat.reshape(h, w)


class _Stains:
    def __init__(self, config: RunConfig, manifest):
        self.tracker = StainTracker(_params(StainParams, config.stains, config.source, "stains"))

    def __call__(self, frame, index):
        _, blobs = self.tracker.push(frame)
        return {"blobs": [b.to_json() for b in blobs], "mask_rle": mask_to_rle(self.tracker.state.active)}


class _Litter:
    def __init__(self, config: RunConfig, manifest):
        block = config.litter
        det = block.get("detector")
        if det is None:
            from .synth import litter_manifest

            det = litter_manifest()
        det = config.path(det)
        try:
            self.detector = reference_detector(det)
        except ValueError as exc:
            raise ConfigError(f"{config.source}: litter.detector: {exc}") from exc
        self.slice = bool(block.get("slice", True))
        self.tile = int(block.get("tile", 640))
        self.overlap = int(block.get("overlap", 128))
        self.iou = float(block.get("iou", 0.5))
        if not 0 <= self.overlap < self.tile:
            raise ConfigError(f"{config.source}: litter: overlap must be in [0, tile)")

    def detect(self, frame):
        if not self.slice:
            return detect_whole(frame, self.detector)
        h, w = frame.shape[:2]
        tile = min(self.tile, max(w, h))
        return detect_sliced(frame, self.detector, plan_tiles(w, h, tile, min(self.overlap, tile - 1)), self.iou)

    def __call__(self, frame, index):
        return [b.to_json() for b in self.detect(frame)]


class _Mapping:
    def __init__(self, config: RunConfig, manifest):
        from .synth import PERSON_CLASS

        block = config.mapping
        self.homography: Homography | None = None
        if block.get("homography") is not None:
            src = config.path(block["homography"])
            d = src if isinstance(src, dict) else load_json(src, "mapping.homography")
            try:
                self.homography = Homography.from_json(d)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{config.source}: mapping.homography: {exc}") from exc
            self.markers = {}
        else:
            self.markers = load_marker_world(_block_source(config, "mapping", "markers", manifest, "markers"))
        classes = block.get("classes", [PERSON_CLASS])
        try:
            self.detector = reference_detector({"classes": classes, "detector": block.get("detector", {})})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{config.source}: mapping.classes: {exc}") from exc
        self.max_assoc = float(block.get("max_assoc_dist", 1.0))
        self.reference = block.get("reference_marker")
        self.history = TrackHistory()

    def __call__(self, frame, index):
        section: dict = {}
        if self.homography is None:
            obs = detect_fiducials(frame)
            try:
                self.homography = calibrate(obs, self.markers)
            except CalibrationError as exc:
                return {"calibrated": False, "error": str(exc), "objects": []}
            section["calibration"] = self.homography.to_json()
        boxes = detect_whole(frame, self.detector)
        mapped = []
        for b in boxes:
            try:
                mapped.append(map_to_floor(self.homography, b, index))
            except HorizonError:
                continue
        self.history = update_tracks(self.history, mapped, self.max_assoc)
        objs = labelled(self.history, mapped) if mapped else []
        records = []
        for m in objs:
            r = m.to_json()
            if self.reference is not None and int(self.reference) in self.markers:
                mw = self.markers[int(self.reference)]
                dx, dy = relative_to(m, (mw.x, mw.y))
                r["relative"] = [round(dx, 4), round(dy, 4)]
            records.append(r)
        dists = [
            {"a": a.object_id, "b": b.object_id, "cm": distance_cm(a, b)}
            for i, a in enumerate(objs)
            for b in objs[i + 1 :]
        ]
        section.update({"calibrated": True, "objects": records, "distances_cm": dists})
        return section


_FRAME_HANDLERS = {"bins": _Bins, "stains": _Stains, "litter": _Litter, "mapping": _Mapping}


def _coverage_section(config: RunConfig) -> dict:
    block = config.coverage
    for key in ("scene", "cameras"):
        if key not in block:
            raise ConfigError(f"{config.source}: coverage.{key} is required")
    try:
        scene_src = config.path(block["scene"])
        scene = Scene.from_json(scene_src if isinstance(scene_src, dict) else load_json(scene_src, "coverage.scene"))
        cams_src = config.path(block["cameras"])
        cameras = load_cameras(cams_src) if isinstance(cams_src, Path) else load_cameras_from(cams_src)
        grid = generate_probes(scene, float(block.get("spacing", 1.0)), float(block.get("probe_height", 0.1)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{config.source}: coverage: {exc}") from exc
    rep = coverage_report(cameras, grid, scene)
    out = rep.to_json()
    if "candidates" in block:
        cand_src = config.path(block["candidates"])
        cands = load_cameras(cand_src) if isinstance(cand_src, Path) else load_cameras_from(cand_src)
        out["placement"] = suggest_placement(scene, grid, cands, float(block.get("target", 1.0))).to_json()
    return out


def load_cameras_from(data) -> list:
    from .coverage import CameraPose

    items = data["cameras"] if isinstance(data, dict) else data
    return [CameraPose.from_json(c) for c in items]


# ----------------------------------------------------------------------------
# run


def _record(kind: str, **body) -> dict:
    return {"type": kind, "format_version": FORMAT_VERSION, **body}


def _sanitize(obj):
    """Make a report JSON-safe: non-finite floats become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.generic):
        return _sanitize(obj.item())
    return obj


def dumps_report(records: list[dict]) -> str:
    return "".join(json.dumps(_sanitize(r), sort_keys=True, separators=(",", ":")) + "\n" for r in records)


@dataclass
class RunResult:
    records: list[dict]
    exit_code: int

    @property
    def text(self) -> str:
        return dumps_report(self.records)


def run(config: RunConfig) -> RunResult:
    """Execute the enabled pipelines over the input frames in order.

    Configuration problems raise :class:`ConfigError`. Failures while
    processing (unreadable frame, pipeline exception) stop the stream, are
    recorded in the report and give exit code 1.
    """
    frame_pipes = [p for p in config.pipelines if p in FRAME_PIPELINES]
    frames: list[Path] = []
    if frame_pipes:
        if config.input is None:
            raise ConfigError(f"{config.source}: 'input' is required for pipelines {frame_pipes}")
        try:
            frames = list_frames(config.input)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{config.source}: input {config.input}: {exc}") from exc
    manifest = _input_manifest(config) if frame_pipes else None
    handlers = {name: _FRAME_HANDLERS[name](config, manifest) for name in frame_pipes}
    coverage_block = _coverage_section(config) if "coverage" in config.pipelines else None

    records = [_record("header", pipelines=config.pipelines, seed=config.seed, n_frames=len(frames))]
    errors = []
    for index, path in enumerate(frames):
        try:
            frame = read_image(path)
        except Exception as exc:  # unreadable or corrupt image
            errors.append({"frame": path.name, "index": index, "pipeline": None, "error": f"cannot read frame: {exc}"})
            break
        rec = _record("frame", frame=path.name, index=index)
        failed = False
        for name, handler in handlers.items():
            try:
                rec[name] = handler(frame, index)
            except Exception as exc:
                log.exception("pipeline %s failed on %s", name, path.name)
                errors.append({"frame": path.name, "index": index, "pipeline": name, "error": f"{type(exc).__name__}: {exc}"})
                failed = True
        records.append(rec)
        if failed:
            break
    if coverage_block is not None:
        records.append(_record("coverage", **coverage_block))
    processed = sum(1 for r in records if r["type"] == "frame")
    status = "ok" if not errors else "partial"
    records.append(_record("summary", status=status, errors=errors, frames_processed=processed))
    return RunResult(records, EXIT_OK if not errors else EXIT_PIPELINE_ERROR)


def write_report(result: RunResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.text)
    return path


def read_report(path: str | Path) -> list[dict]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON record: {exc.msg}") from exc
    return out


# ----------------------------------------------------------------------------
# evaluation


class EvaluationError(ValueError):
    pass


def match_boxes(pred: list[DetectionBox], truth: list[DetectionBox], thr: float = 0.5) -> int:
    """Greedy one-to-one matching, highest confidence first; returns true positives."""
    used = set()
    tp = 0
    for p in sorted(pred, key=lambda b: (-b.confidence, b.x, b.y, b.w, b.h, b.class_id)):
        best, best_iou = -1, thr
        for j, t in enumerate(truth):
            if j in used or t.class_id != p.class_id:
                continue
            v = iou(p, t)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = j, v
        if best >= 0:
            used.add(best)
            tp += 1
    return tp


def _ratio(num: float, den: float) -> float:
    return num / den if den else 1.0


def manifest_as_report(manifest: dict, base_dir: str | Path | None = None) -> list[dict]:
    """A report that restates the manifest's truth; evaluates to perfect scores."""
    records = [_record("header", pipelines=["bins", "litter", "mapping", "stains"], seed=manifest.get("seed", 0), n_frames=len(manifest["frames"]))]
    for i, fr in enumerate(manifest["frames"]):
        rec = _record("frame", frame=fr["frame"], index=i)
        rec["litter"] = [dict(b, conf=1.0) for b in fr.get("boxes", [])]
        rec["bins"] = [{"bin_id": b["bin_id"], "state": b["state"]} for b in fr.get("bins", [])]
        rec["mapping"] = {"calibrated": True, "objects": [{"x": p["x"], "y": p["y"]} for p in fr.get("people", [])]}
        if "stain_mask" in fr and base_dir is not None:
            rec["stains"] = {"mask_rle": mask_to_rle(read_mask(Path(base_dir) / fr["stain_mask"]))}
        records.append(rec)
    return records


def evaluate(report: list[dict] | str | Path, manifest: dict | str | Path, manifest_dir: str | Path | None = None) -> dict:
    """Compare a run report against a ground-truth manifest.

    Returns detection precision/recall at IoU 0.5, pooled stain mask IoU,
    bin-state accuracy and floor mapping RMS error in metres. A metric is
    null when the report has no section for it.
    """
    if not isinstance(report, list):
        report = read_report(report)
    if not isinstance(manifest, dict):
        manifest_dir = manifest_dir or Path(manifest).parent
        manifest = load_json(manifest, "manifest")
    frames = [r for r in report if r.get("type") == "frame"]
    truth = manifest["frames"]
    if len(frames) != len(truth):
        raise EvaluationError(f"report has {len(frames)} frames, manifest has {len(truth)}")
    for r, t in zip(frames, truth):
        if r["frame"] != Path(t["frame"]).name:
            raise EvaluationError(f"frame mismatch: report {r['frame']!r} vs manifest {t['frame']!r}")

    det = {"tp": 0, "pred": 0, "truth": 0, "seen": False}
    stain = {"inter": 0, "union": 0, "seen": False}
    bins = {"ok": 0, "n": 0, "seen": False}
    sq_err, n_mapped, n_people, map_seen = 0.0, 0, 0, False
    for r, t in zip(frames, truth):
        if "litter" in r:
            det["seen"] = True
            pred = [DetectionBox.from_json(b) for b in r["litter"]]
            gt = [DetectionBox(b["x"], b["y"], b["w"], b["h"], b["class"]) for b in t.get("boxes", [])]
            det["tp"] += match_boxes(pred, gt)
            det["pred"] += len(pred)
            det["truth"] += len(gt)
        if "stains" in r and "stain_mask" in t and manifest_dir is not None:
            stain["seen"] = True
            pm = rle_to_mask(r["stains"]["mask_rle"])
            gm = read_mask(Path(manifest_dir) / t["stain_mask"])
            if pm.shape != gm.shape:
                raise EvaluationError(f"stain mask shape mismatch on {r['frame']}")
            stain["inter"] += int((pm & gm).sum())
            stain["union"] += int((pm | gm).sum())
        if "bins" in r:
            bins["seen"] = True
            got = {b["bin_id"]: b["state"] for b in r["bins"]}
            for b in t.get("bins", []):
                bins["n"] += 1
                bins["ok"] += got.get(b["bin_id"]) == b["state"]
        if "mapping" in r:
            map_seen = True
            objs = [(o["x"], o["y"]) for o in r["mapping"].get("objects", [])]
            people = [(p["x"], p["y"]) for p in t.get("people", [])]
            n_people += len(people)
            pairs = sorted(
                (math.hypot(o[0] - p[0], o[1] - p[1]), i, j) for i, o in enumerate(objs) for j, p in enumerate(people)
            )
            used_o, used_p = set(), set()
            for d, i, j in pairs:
                if i in used_o or j in used_p:
                    continue
                used_o.add(i)
                used_p.add(j)
                sq_err += d * d
                n_mapped += 1
    return {
        "frames": len(frames),
        "precision": _ratio(det["tp"], det["pred"]) if det["seen"] else None,
        "recall": _ratio(det["tp"], det["truth"]) if det["seen"] else None,
        "stain_iou": _ratio(stain["inter"], stain["union"]) if stain["seen"] else None,
        "bin_accuracy": _ratio(bins["ok"], bins["n"]) if bins["seen"] else None,
        "mapping_rms_m": math.sqrt(sq_err / n_mapped) if map_seen and n_mapped else None,
        "mapping_matched": n_mapped if map_seen else None,
        "mapping_truth": n_people if map_seen else None,
    }
