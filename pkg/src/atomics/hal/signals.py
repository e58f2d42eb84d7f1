"""Telemetry value types produced by the bench: power samples, frames, acks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SwitchRoute(Enum):
    POWER_METER = "power_meter"
    DAQ = "daq"


@dataclass(frozen=True)
class PowerSample:
    """One power-meter reading. Timestamps are monotonic bench-clock seconds
    and strictly increase within a stream; power is never negative."""

    timestamp: float
    power: float
    route: SwitchRoute

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be >= 0")


@dataclass(frozen=True)
class MoveAck:
    axis_id: str
    target: float
    settled: bool = True


@dataclass
class Frame:
    """8-bit grayscale camera frame with the microscope encoder readout
    embedded at capture time."""

    width: int
    height: int
    pixel_data: np.ndarray  # uint8, shape (height, width), row-major
    camera_encoder: tuple[float, float, float]
    exposure_id: int

    def __post_init__(self):
        if self.pixel_data.shape != (self.height, self.width):
            raise ValueError(
                f"pixel_data shape {self.pixel_data.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.pixel_data.dtype != np.uint8:
            raise ValueError("pixel_data must be uint8 grayscale")
