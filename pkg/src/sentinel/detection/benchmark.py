"""Latency harness: per-resolution detector timing with and without slicing."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .detector import DetectorHandle
from .sliced import detect_sliced, detect_whole
from .tiling import plan_tiles

DEFAULT_RESOLUTIONS = [(640, 480), (720, 576), (1024, 768), (1280, 720), (1920, 1080), (3840, 2160)]


@dataclass(frozen=True)
class TimingRecord:
    resolution: tuple[int, int]
    sliced: bool
    mean_ms: float
    p95_ms: float
    n_runs: int
    invocations: int  # detector calls per frame

    def to_json(self) -> dict:
        return {
            "resolution": list(self.resolution),
            "sliced": self.sliced,
            "mean_ms": self.mean_ms,
            "p95_ms": self.p95_ms,
            "n_runs": self.n_runs,
            "invocations": self.invocations,
        }


class _TimedDetector:
    """Proxy that accumulates wall time and call count around ``detect``."""

    def __init__(self, inner: DetectorHandle):
        self.inner = inner
        self.native_size = inner.native_size
        self.concurrent_safe = False
        self.elapsed = 0.0
        self.calls = 0

    def detect(self, image):
        t0 = time.perf_counter()
        try:
            return self.inner.detect(image)
        finally:
            self.elapsed += time.perf_counter() - t0
            self.calls += 1


def benchmark(
    detector: DetectorHandle,
    resolutions=DEFAULT_RESOLUTIONS,
    sliced: bool = False,
    n_runs: int = 3,
    tile_size: int = 640,
    overlap: int = 128,
    frame_factory=None,
    seed: int = 0,
) -> list[TimingRecord]:
    """Time detector calls only (no resize/merge/I-O) for each resolution.

    ``frame_factory(w, h, seed)`` supplies the test frame; by default a
    litter scene from :mod:`sentinel.synth`.
    """
    if n_runs < 3:
        raise ValueError("n_runs must be >= 3")
    if frame_factory is None:
        from ..synth import random_litter_scene

        def frame_factory(w, h, s):
            return random_litter_scene(w, h, 20, (8, 16), seed=s)[0]

    records = []
    for w, h in resolutions:
        frame = frame_factory(w, h, seed)
        plan = plan_tiles(w, h, min(tile_size, max(w, h)), overlap) if sliced else None
        samples = []
        calls = 0
        for _ in range(n_runs):
            timed = _TimedDetector(detector)
            if sliced:
                detect_sliced(frame, timed, plan)
            else:
                detect_whole(frame, timed)
            samples.append(timed.elapsed * 1000.0)
            calls = timed.calls
        arr = np.asarray(samples)
        records.append(
            TimingRecord((w, h), sliced, float(arr.mean()), float(np.percentile(arr, 95)), n_runs, calls)
        )
    return records


def timing_table(results: dict[str, tuple[list[TimingRecord], list[TimingRecord]]]) -> str:
    """Markdown table: one row per resolution, a no-slice column group and a
    slice column group, one column per model inside each group.

    ``results`` maps model name to ``(whole_records, sliced_records)``.
    """
    names = list(results)
    if not names:
        raise ValueError("no results to tabulate")
    rows_res = [r.resolution for r in results[names[0]][0]]
    header1 = "| | " + " | ".join(["no slice"] + [""] * (len(names) - 1) + ["slice"] + [""] * (len(names) - 1)) + " |"
    header2 = "| Resolution | " + " | ".join(names + names) + " |"
    sep = "|---|" + "---:|" * (2 * len(names))
    lines = [header1, header2, sep]
    for i, (w, h) in enumerate(rows_res):
        cells = [f"{results[n][0][i].mean_ms:.1f}" for n in names] + [f"{results[n][1][i].mean_ms:.1f}" for n in names]
        lines.append(f"| {w} × {h} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
