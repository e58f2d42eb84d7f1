"""Vision output contracts."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import IllConditioned


class DetClass(Enum):
    FIBER_TIP_LEFT = "fiber_tip_left"
    FIBER_TIP_RIGHT = "fiber_tip_right"
    EDGE_COUPLER = "edge_coupler"
    CHIPLET_EDGE = "chiplet_edge"


@dataclass(frozen=True)
class Detection:
    cls: DetClass
    bbox: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    score: float
    centroid: tuple[float, float]

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate bbox {self.bbox}")
        cx, cy = self.centroid
        if not (x0 <= cx <= x1 and y0 <= cy <= y1):
            raise ValueError("centroid outside bbox")

    def to_dict(self) -> dict:
        return {
            "class": self.cls.value,
            "bbox": list(self.bbox),
            "score": self.score,
            "centroid": list(self.centroid),
        }


MAX_CONDITION_NUMBER = 1e6


@dataclass(frozen=True)
class AffineMap2:
    """Stage micrometers -> frame pixels: p = M s + t."""

    matrix: tuple[tuple[float, float], tuple[float, float]]
    offset: tuple[float, float]
    condition_number: float
    rms_residual_px: float = 0.0

    def __post_init__(self):
        if self.condition_number >= MAX_CONDITION_NUMBER:
            raise IllConditioned(
                f"condition number {self.condition_number:.3g} >= {MAX_CONDITION_NUMBER:g}"
            )

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.offset, dtype=float)

    def apply(self, stage_um: tuple[float, float]) -> tuple[float, float]:
        p = self.m @ np.asarray(stage_um, dtype=float) + self.t
        return (float(p[0]), float(p[1]))

    def invert(self, pixel: tuple[float, float]) -> tuple[float, float]:
        s = np.linalg.solve(self.m, np.asarray(pixel, dtype=float) - self.t)
        return (float(s[0]), float(s[1]))

    def invert_linear(self, delta_pixel: tuple[float, float]) -> tuple[float, float]:
        """Map a pixel displacement through the inverse linear part only."""
        s = np.linalg.solve(self.m, np.asarray(delta_pixel, dtype=float))
        return (float(s[0]), float(s[1]))
