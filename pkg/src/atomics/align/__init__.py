"""The coupling controller: state machine, search and scan primitives, and
the phase-sequencing controller that drives a device to Locked."""

from .config import AlignConfig
from .fsm import CouplingFsm, CouplingState, Event, TRANSITIONS, legal_next
from .scans import FitResult, ScanResult, fit_log_quadratic, ring_radius, spiral_offsets
from .controller import AlignmentResult, CouplingController

__all__ = [
    "AlignConfig",
    "AlignmentResult",
    "CouplingController",
    "CouplingFsm",
    "CouplingState",
    "Event",
    "FitResult",
    "ScanResult",
    "TRANSITIONS",
    "fit_log_quadratic",
    "legal_next",
    "ring_radius",
    "spiral_offsets",
]
