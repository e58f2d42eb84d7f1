"""Stability gating and the realign decision rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from ..errors import WindowTooShort

MIN_WINDOW = 20
RSD_THRESHOLD = 0.02


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    window_rsd: float
    window_len: int


def stability_check(
    window: list[float],
    reference: float,
    lock_threshold_db: float = 1.0,
    rsd_threshold: float = RSD_THRESHOLD,
    min_window: int = MIN_WINDOW,
) -> StabilityVerdict:
    """Stable iff the window's relative standard deviation is under the
    threshold and no sample sits more than lock_threshold_db below the
    reference."""
    if len(window) < min_window:
        raise WindowTooShort(f"need >= {min_window} samples, got {len(window)}")
    n = len(window)
    mean = sum(window) / n
    var = sum((x - mean) ** 2 for x in window) / n
    rsd = math.sqrt(var) / mean if mean > 0 else float("inf")
    floor = reference * 10 ** (-lock_threshold_db / 10)
    stable = rsd < rsd_threshold and min(window) >= floor
    return StabilityVerdict(stable=stable, window_rsd=rsd, window_len=n)


class RealignAction(Enum):
    NONE = "none"
    FINE_REALIGN = "fine_realign"
    FULL_RECOUPLE = "full_recouple"


def realign_decision(
    cusum_alarm: bool, current_power: float, first_light_threshold: float
) -> RealignAction:
    """No alarm: stay put. Alarm with light still in the capture basin:
    trimmed realignment. Alarm with power at the floor (bumped fiber):
    full recouple."""
    if not cusum_alarm:
        return RealignAction.NONE
    if current_power > first_light_threshold:
        return RealignAction.FINE_REALIGN
    return RealignAction.FULL_RECOUPLE
