from .benchmark import DEFAULT_RESOLUTIONS, TimingRecord, benchmark, timing_table
from .boxes import DetectionBox, iou, nms
from .detector import BlobClass, DetectorHandle, ManifestError, ReferenceDetector, reference_detector
from .sliced import TileDetectionError, detect_sliced, detect_whole
from .tiling import TilePlan, plan_tiles, tiles_per_axis

__all__ = [
    "DEFAULT_RESOLUTIONS",
    "BlobClass",
    "DetectionBox",
    "DetectorHandle",
    "ManifestError",
    "ReferenceDetector",
    "TileDetectionError",
    "TilePlan",
    "TimingRecord",
    "benchmark",
    "detect_sliced",
    "detect_whole",
    "iou",
    "nms",
    "plan_tiles",
    "reference_detector",
    "tiles_per_axis",
    "timing_table",
]
