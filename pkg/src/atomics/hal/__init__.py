"""Driver-agnostic hardware abstraction: axes, signal types, driver registry
and the serialized bench facade."""

from .axes import Axis, AxisId, AxisState, Tower, all_axes, axes_for
from .signals import Frame, MoveAck, PowerSample, SwitchRoute
from .drivers import (
    CameraDriver,
    DaqDriver,
    DriverRegistry,
    GoniometerDriver,
    InstrumentRole,
    PolarizationDriver,
    PowerMeterDriver,
    StageDriver,
    SwitchDriver,
    TempControllerDriver,
)
from .bench import Bench

__all__ = [
    "Axis",
    "AxisId",
    "AxisState",
    "Bench",
    "CameraDriver",
    "DaqDriver",
    "DriverRegistry",
    "Frame",
    "GoniometerDriver",
    "InstrumentRole",
    "MoveAck",
    "PolarizationDriver",
    "PowerMeterDriver",
    "PowerSample",
    "StageDriver",
    "SwitchDriver",
    "SwitchRoute",
    "TempControllerDriver",
    "Tower",
    "all_axes",
    "axes_for",
]
