"""Stateful vision front-end: templates + calibration + tracking.

Wraps the pure detector with the bookkeeping the controller needs: ROI
gating from track history, pixel->bench conversion through the calibration
and the microscope encoders, and calibration staleness checks.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import CalibrationStale, DetectionLost, Uncalibrated
from ..hal.signals import Frame
from .calibrate import CalibrationRecord, global_position
from .detect import detect
from .templates import Templates
from .track import TrackState, track
from .types import AffineMap2, DetClass, Detection

ROI_PAD_PX = 70


class VisionSystem:
    def __init__(
        self,
        templates: Templates,
        now: Callable[[], float],
        calibration: CalibrationRecord | None = None,
        max_calibration_age_s: float = 6 * 3600.0,
        threshold: float = 0.6,
    ):
        self.templates = templates
        self.now = now
        self.calibration = calibration
        self.max_calibration_age_s = max_calibration_age_s
        self.threshold = threshold
        self.tracks = TrackState()
        self.last_detections: list[Detection] = []
        self._misses: dict[DetClass, int] = {}

    # -- calibration ------------------------------------------------------

    @property
    def map(self) -> AffineMap2 | None:
        return self.calibration.map2 if self.calibration else None

    def set_calibration(self, record: CalibrationRecord) -> None:
        self.calibration = record

    def calibration_age(self) -> float | None:
        if self.calibration is None:
            return None
        return self.calibration.age(self.now())

    def require_fresh_calibration(self) -> AffineMap2:
        if self.calibration is None:
            raise Uncalibrated("no calibration loaded")
        if self.calibration.age(self.now()) > self.max_calibration_age_s:
            raise CalibrationStale(
                f"calibration is {self.calibration.age(self.now()):.0f}s old "
                f"(max {self.max_calibration_age_s:.0f}s)"
            )
        return self.calibration.map2

    # -- conversions --------------------------------------------------------

    def to_bench(self, frame: Frame, pixel: tuple[float, float]) -> tuple[float, float]:
        cam = (frame.camera_encoder[0], frame.camera_encoder[1])
        return global_position(cam, self.map, pixel, (frame.width / 2, frame.height / 2))

    def to_pixel(self, frame: Frame, bench_um: tuple[float, float]) -> tuple[float, float]:
        if self.map is None:
            raise Uncalibrated("no calibration loaded")
        dx = bench_um[0] - frame.camera_encoder[0]
        dy = bench_um[1] - frame.camera_encoder[1]
        px = self.map.m @ (dx, dy)
        return (frame.width / 2 + px[0], frame.height / 2 + px[1])

    # -- detection ------------------------------------------------------------

    def locate(
        self,
        frame: Frame,
        cls: DetClass,
        near_um: tuple[float, float] | None = None,
        gate_px: float = 50.0,
        miss_limit: int = 5,
        min_score: float = 0.0,
    ) -> tuple[tuple[float, float], Detection]:
        """Bench position of one feature.

        Multi-instance classes (couplers) resolve by proximity to near_um
        within gate_px, so a missing coupler is a miss rather than a silent
        jump to its neighbor. Singleton classes ride the per-class track,
        ROI-gated for speed. Raises DetectionLost after miss_limit
        consecutive failures for the class."""
        roi = None
        hint_px = None
        if near_um is not None and self.map is not None:
            hint_px = self.to_pixel(frame, near_um)
        elif self.tracks.centroid(cls) is not None:
            hint_px = self.tracks.centroid(cls)
        if hint_px is not None:
            roi = (
                hint_px[0] - ROI_PAD_PX,
                hint_px[1] - ROI_PAD_PX,
                hint_px[0] + ROI_PAD_PX,
                hint_px[1] + ROI_PAD_PX,
            )
        dets = detect(frame, self.templates, threshold=self.threshold, classes=[cls], roi=roi)
        if not dets and roi is not None:
            dets = detect(frame, self.templates, threshold=self.threshold, classes=[cls])
        self.tracks, assigned = track(self.tracks, dets, frame.exposure_id)

        chosen: Detection | None = None
        if near_um is not None and self.map is not None:
            target_px = self.to_pixel(frame, near_um)
            gated = [d for d in dets if math.dist(d.centroid, target_px) <= gate_px]
            if gated:
                chosen = min(gated, key=lambda d: math.dist(d.centroid, target_px))
        else:
            chosen = assigned.get(cls) or (dets[0] if dets else None)
        if chosen is not None and chosen.score < min_score:
            chosen = None
        if chosen is None:
            self._misses[cls] = self._misses.get(cls, 0) + 1
            if self._misses[cls] > miss_limit:
                raise DetectionLost(f"{cls.value} lost for {self._misses[cls]} frames")
            raise _Miss(cls)
        self._misses[cls] = 0
        return self.to_bench(frame, chosen.centroid), chosen

    def annotate(self, frame: Frame) -> list[Detection]:
        dets = detect(frame, self.templates, threshold=self.threshold)
        self.last_detections = dets
        return dets


class _Miss(Exception):
    """Single-frame miss, below the DetectionLost budget; retry with a new frame."""

    def __init__(self, cls: DetClass):
        super().__init__(f"no {cls.value} in frame")
        self.cls = cls
