"""Named motion axes of the bench and their soft-limit state.

Topology is fixed: the two fiber towers and the microscope are 3-axis
(X, Y, Z), the chiplet stage is 2-axis (X, Y) and the goniometer is a
single tilt axis whose limits must span exactly 10 degrees. Any other
tower/axis combination is unconstructible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Tower(Enum):
    LEFT_FIBER = "left_fiber"
    RIGHT_FIBER = "right_fiber"
    CHIPLET_STAGE = "chiplet_stage"
    MICROSCOPE = "microscope"
    GONIOMETER = "goniometer"


class Axis(Enum):
    X = "x"
    Y = "y"
    Z = "z"
    THETA = "theta"


_TOPOLOGY = {
    Tower.LEFT_FIBER: (Axis.X, Axis.Y, Axis.Z),
    Tower.RIGHT_FIBER: (Axis.X, Axis.Y, Axis.Z),
    Tower.CHIPLET_STAGE: (Axis.X, Axis.Y),
    Tower.MICROSCOPE: (Axis.X, Axis.Y, Axis.Z),
    Tower.GONIOMETER: (Axis.THETA,),
}

GONIOMETER_SPAN_DEG = 10.0


@dataclass(frozen=True)
class AxisId:
    """One motion axis, e.g. AxisId(Tower.LEFT_FIBER, Axis.Z).

    Linear axes are in micrometers, the goniometer axis in degrees.
    """

    tower: Tower
    axis: Axis

    def __post_init__(self):
        legal = _TOPOLOGY[self.tower]
        if self.axis not in legal:
            raise ValueError(
                f"{self.tower.value} has no {self.axis.value} axis "
                f"(legal: {[a.value for a in legal]})"
            )

    def __str__(self):
        return f"{self.tower.value}.{self.axis.value}"

    @classmethod
    def parse(cls, text: str) -> "AxisId":
        tower_s, _, axis_s = text.partition(".")
        return cls(Tower(tower_s), Axis(axis_s))


def axes_for(tower: Tower) -> tuple[AxisId, ...]:
    return tuple(AxisId(tower, a) for a in _TOPOLOGY[tower])


def all_axes() -> tuple[AxisId, ...]:
    return tuple(aid for t in Tower for aid in axes_for(t))


@dataclass
class AxisState:
    """Soft limits plus the open-loop position estimate for one axis.

    Piezo axes have no absolute encoder, so estimated_position tracks the
    commanded target and uncertainty_um accumulates with travel; vision and
    power feedback are the real position references.
    """

    commanded_position: float = 0.0
    estimated_position: float = 0.0
    uncertainty_um: float = 0.0
    soft_limits: tuple[float, float] = (-2500.0, 2500.0)
    moving: bool = False

    def __post_init__(self):
        lo, hi = self.soft_limits
        if not lo < hi:
            raise ValueError(f"soft limits must satisfy min < max, got {self.soft_limits}")
        if not lo <= self.commanded_position <= hi:
            raise ValueError("commanded position outside soft limits")

    def within_limits(self, target: float) -> bool:
        lo, hi = self.soft_limits
        return lo <= target <= hi


def validate_goniometer_limits(limits: tuple[float, float]) -> None:
    lo, hi = limits
    if abs((hi - lo) - GONIOMETER_SPAN_DEG) > 1e-9:
        raise ValueError(
            f"goniometer limits must span exactly {GONIOMETER_SPAN_DEG} degrees, got {limits}"
        )


def default_axis_states() -> dict[AxisId, AxisState]:
    """Park topology: generous symmetric limits, goniometer [0, 10] degrees."""
    states: dict[AxisId, AxisState] = {}
    for aid in all_axes():
        if aid.axis is Axis.THETA:
            states[aid] = AxisState(soft_limits=(0.0, GONIOMETER_SPAN_DEG))
        else:
            states[aid] = AxisState(soft_limits=(-2500.0, 2500.0))
    return states
