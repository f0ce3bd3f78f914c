"""Pluggable detector interface and the deterministic colour-blob reference detector."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from ..imaging.components import component_stats, connected_components
from ..imaging.transform import resize_bilinear
from .boxes import DetectionBox


class DetectorHandle(Protocol):
    """Anything that turns an RGB image into boxes in that image's pixel frame.

    Implementations must be deterministic. ``concurrent_safe`` tells the
    sliced scheduler whether tiles may be submitted from several threads.
    """

    native_size: tuple[int, int]
    concurrent_safe: bool

    def detect(self, image: np.ndarray) -> list[DetectionBox]: ...


@dataclass(frozen=True)
class BlobClass:
    class_id: int
    color: tuple[int, int, int]
    name: str = ""


class ManifestError(ValueError):
    pass


class ReferenceDetector:
    """Finds solid colour blobs of known classes.

    The input is resampled to ``native_size`` (as a fixed-input network
    would), pixels within ``tolerance`` (max per-channel difference) of a
    class colour are grouped into 8-connected blobs, and blobs of at least
    ``min_area`` native pixels become boxes. The area floor plays the role
    of a network's smallest resolvable object.
    """

    concurrent_safe = True

    def __init__(
        self,
        classes: list[BlobClass],
        native_size: tuple[int, int] = (640, 640),
        tolerance: int = 40,
        min_area: int = 9,
    ):
        if not classes:
            raise ManifestError("manifest lists no blob classes")
        self.classes = list(classes)
        self.native_size = tuple(native_size)
        self.tolerance = tolerance
        self.min_area = min_area
        self.calls = 0

    def detect(self, image: np.ndarray) -> list[DetectionBox]:
        self.calls += 1
        if image.ndim != 3:
            raise ValueError("reference detector expects an RGB image")
        h, w = image.shape[:2]
        nw, nh = self.native_size
        native = resize_bilinear(image, (nw, nh)).astype(np.int16)
        planes = [native[..., c] for c in range(3)]
        sx, sy = w / nw, h / nh
        boxes = []
        for cls in self.classes:
            r, g, b = (np.abs(p - c) for p, c in zip(planes, cls.color))
            diff = np.maximum(np.maximum(r, g), b)
            mask = diff <= self.tolerance
            if not mask.any():
                continue
            lmap = connected_components(mask, 8)
            for st in component_stats(lmap):
                if st.area < self.min_area:
                    continue
                bx, by, bw, bh = st.bbox
                closeness = 1.0 - diff[lmap.labels == st.label].mean() / (self.tolerance + 1)
                boxes.append(
                    DetectionBox(bx * sx, by * sy, bw * sx, bh * sy, cls.class_id, float(closeness))
                )
        return boxes


def _parse_classes(manifest: dict) -> list[BlobClass]:
    try:
        raw = manifest["classes"]
        return [
            BlobClass(int(c["id"]), tuple(int(v) for v in c["color"]), str(c.get("name", "")))
            for c in raw
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed detector manifest: {exc}") from exc


def reference_detector(manifest: dict | str | Path, **overrides) -> ReferenceDetector:
    """Build a :class:`ReferenceDetector` from a manifest dict or JSON file.

    Expected layout: ``{"classes": [{"id": 0, "color": [r, g, b]}, ...]}``
    with optional ``detector`` settings (``native_size``, ``tolerance``,
    ``min_area``).
    """
    if not isinstance(manifest, dict):
        try:
            manifest = json.loads(Path(manifest).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {manifest}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ManifestError("manifest must be a JSON object")
    settings = dict(manifest.get("detector", {}))
    settings.update(overrides)
    if "native_size" in settings:
        settings["native_size"] = tuple(int(v) for v in settings["native_size"])
    return ReferenceDetector(_parse_classes(manifest), **settings)
