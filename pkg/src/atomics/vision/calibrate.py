"""Least-squares affine calibration between stage micrometers and pixels,
and the encoder-anchored global position transform."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ..errors import Degenerate, Uncalibrated
from .types import AffineMap2


def calibrate(
    correspondences: list[tuple[tuple[float, float], tuple[float, float]]],
) -> AffineMap2:
    """Fit pixel = M @ stage + t minimizing pixel residual.

    Needs >= 3 correspondences that are not collinear in stage space.
    Raises Degenerate / IllConditioned accordingly.
    """
    if len(correspondences) < 3:
        raise Degenerate(f"need >= 3 correspondences, got {len(correspondences)}")
    stage = np.asarray([c[0] for c in correspondences], dtype=float)
    pixel = np.asarray([c[1] for c in correspondences], dtype=float)

    centered = stage - stage.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[-1] < 1e-9 * max(svals[0], 1.0):
        raise Degenerate("stage points are collinear")

    a = np.column_stack([stage, np.ones(len(stage))])
    coef, *_ = np.linalg.lstsq(a, pixel, rcond=None)  # 3x2: rows are mx, my, t
    m = coef[:2].T
    t = coef[2]
    residual = pixel - (stage @ coef[:2] + t)
    rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    cond = float(np.linalg.cond(m))
    return AffineMap2(
        matrix=((m[0, 0], m[0, 1]), (m[1, 0], m[1, 1])),
        offset=(float(t[0]), float(t[1])),
        condition_number=cond,
        rms_residual_px=rms,
    )


def pixel_to_stage(map2: AffineMap2, pixel: tuple[float, float]) -> tuple[float, float]:
    return map2.invert(pixel)


def global_position(
    camera_encoder: tuple[float, float],
    map2: AffineMap2 | None,
    pixel: tuple[float, float],
    frame_center: tuple[float, float],
) -> tuple[float, float]:
    """Bench-frame micrometers of a pixel feature: the microscope encoder
    anchors the frame center; the offset converts through the calibration's
    inverse linear part. Invariant under camera translation."""
    if map2 is None:
        raise Uncalibrated("no stage-to-pixel calibration available")
    dx, dy = map2.invert_linear((pixel[0] - frame_center[0], pixel[1] - frame_center[1]))
    return (camera_encoder[0] + dx, camera_encoder[1] + dy)


@dataclass
class CalibrationRecord:
    objective_id: str
    timestamp: float
    map2: AffineMap2

    def age(self, now: float) -> float:
        return now - self.timestamp


def save_calibration(record: CalibrationRecord, path: str | Path) -> None:
    doc = {
        "objective_id": record.objective_id,
        "timestamp": record.timestamp,
        "matrix": [list(row) for row in record.map2.matrix],
        "offset": list(record.map2.offset),
        "condition_number": record.map2.condition_number,
        "rms_residual_px": record.map2.rms_residual_px,
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_calibration(path: str | Path) -> CalibrationRecord:
    doc = yaml.safe_load(Path(path).read_text())
    map2 = AffineMap2(
        matrix=tuple(tuple(row) for row in doc["matrix"]),
        offset=tuple(doc["offset"]),
        condition_number=float(doc["condition_number"]),
        rms_residual_px=float(doc.get("rms_residual_px", 0.0)),
    )
    return CalibrationRecord(
        objective_id=str(doc["objective_id"]),
        timestamp=float(doc["timestamp"]),
        map2=map2,
    )
