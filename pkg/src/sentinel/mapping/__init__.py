"""Ground-plane calibration, floor mapping and track history."""

from .fiducials import CODEBOOK, FiducialObservation, MarkerWorld, calibrate, detect_fiducials, load_marker_world
from .homography import (
    CalibrationError,
    Homography,
    HorizonError,
    MappedObject,
    distance_cm,
    estimate_homography,
    fit_homography,
    map_to_floor,
    relative_to,
)
from .tracking import FloorMap, TrackHistory, labelled, to_floor_map, update_tracks

__all__ = [
    "CODEBOOK",
    "CalibrationError",
    "FiducialObservation",
    "FloorMap",
    "Homography",
    "HorizonError",
    "MappedObject",
    "MarkerWorld",
    "TrackHistory",
    "calibrate",
    "detect_fiducials",
    "distance_cm",
    "estimate_homography",
    "fit_homography",
    "labelled",
    "load_marker_world",
    "map_to_floor",
    "relative_to",
    "to_floor_map",
    "update_tracks",
]
