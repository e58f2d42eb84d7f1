"""Fiber-tip / edge-coupler localization, tracking, and the stage-to-pixel
calibration. The reference detector is normalized cross-correlation template
matching behind a detector-agnostic contract; a learned-model adapter can
replace it without touching callers."""

from .types import AffineMap2, DetClass, Detection
from .detect import detect, iou, nms
from .templates import default_templates, load_templates, save_templates
from .calibrate import (
    CalibrationRecord,
    calibrate,
    global_position,
    load_calibration,
    pixel_to_stage,
    save_calibration,
)
from .track import TrackState, track

__all__ = [
    "AffineMap2",
    "CalibrationRecord",
    "DetClass",
    "Detection",
    "TrackState",
    "calibrate",
    "default_templates",
    "detect",
    "global_position",
    "iou",
    "load_calibration",
    "load_templates",
    "nms",
    "pixel_to_stage",
    "save_calibration",
    "save_templates",
    "track",
]
