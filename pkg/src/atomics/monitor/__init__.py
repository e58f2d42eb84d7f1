"""Streaming power-telemetry analysis: stability gating, drift/change
detection and long-horizon logging.

This package deliberately has no dependency on the hardware layer: it
consumes plain floats and timestamps and only ever emits verdicts and
events for the controller to act on.
"""

from .detectors import (
    CusumState,
    EwmaState,
    cusum_update,
    estimate_sigma,
    ewma_update,
)
from .policy import (
    RealignAction,
    StabilityVerdict,
    realign_decision,
    stability_check,
)
from .persist import AlarmLog, TelemetryLog

__all__ = [
    "AlarmLog",
    "CusumState",
    "EwmaState",
    "RealignAction",
    "StabilityVerdict",
    "TelemetryLog",
    "cusum_update",
    "estimate_sigma",
    "ewma_update",
    "realign_decision",
    "stability_check",
]
