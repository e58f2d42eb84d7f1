"""The coupling state machine.

The transition table is data, not code, so the acceptance suite can
enumerate every (state, event) pair against it. Any event not in the
table raises IllegalTransition and leaves the state unchanged. The only
guarded edge is Realigning -> Locked, which additionally requires that the
realignment's fit already converged (FitConverged seen since entry).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from ..errors import IllegalTransition

log = logging.getLogger(__name__)


class CouplingState(Enum):
    IDLE = "idle"
    CALIBRATING = "calibrating"
    COARSE_ALIGN = "coarse_align"
    SAFE_APPROACH = "safe_approach"
    SEARCH_FIRST_LIGHT = "search_first_light"
    FINE_ALIGN = "fine_align"
    POLARIZATION_OPT = "polarization_opt"
    LOCKED = "locked"
    REALIGNING = "realigning"
    FAULT = "fault"


class Event(Enum):
    START_COUPLE = "start_couple"
    START_CALIBRATE = "start_calibrate"
    FIRST_LIGHT_FOUND = "first_light_found"
    FIT_CONVERGED = "fit_converged"
    POL_DONE = "pol_done"
    STABILITY_OK = "stability_ok"
    DRIFT_ALARM = "drift_alarm"
    DIVERGED = "diverged"
    FAULT_RAISED = "fault_raised"
    ABORT = "abort"
    RESET = "reset"


def _build_table() -> dict[tuple[CouplingState, Event], CouplingState]:
    t: dict[tuple[CouplingState, Event], CouplingState] = {}
    for s in CouplingState:
        t[(s, Event.FAULT_RAISED)] = CouplingState.FAULT
        t[(s, Event.ABORT)] = CouplingState.IDLE
        t[(s, Event.RESET)] = CouplingState.IDLE
    t[(CouplingState.IDLE, Event.START_COUPLE)] = CouplingState.COARSE_ALIGN
    t[(CouplingState.IDLE, Event.START_CALIBRATE)] = CouplingState.CALIBRATING
    t[(CouplingState.CALIBRATING, Event.FIT_CONVERGED)] = CouplingState.IDLE
    t[(CouplingState.COARSE_ALIGN, Event.FIT_CONVERGED)] = CouplingState.SAFE_APPROACH
    t[(CouplingState.SAFE_APPROACH, Event.FIT_CONVERGED)] = CouplingState.SEARCH_FIRST_LIGHT
    t[(CouplingState.SEARCH_FIRST_LIGHT, Event.FIRST_LIGHT_FOUND)] = CouplingState.FINE_ALIGN
    t[(CouplingState.FINE_ALIGN, Event.FIT_CONVERGED)] = CouplingState.POLARIZATION_OPT
    t[(CouplingState.FINE_ALIGN, Event.DIVERGED)] = CouplingState.SEARCH_FIRST_LIGHT
    t[(CouplingState.POLARIZATION_OPT, Event.POL_DONE)] = CouplingState.POLARIZATION_OPT
    t[(CouplingState.POLARIZATION_OPT, Event.STABILITY_OK)] = CouplingState.LOCKED
    t[(CouplingState.LOCKED, Event.DRIFT_ALARM)] = CouplingState.REALIGNING
    t[(CouplingState.REALIGNING, Event.FIT_CONVERGED)] = CouplingState.REALIGNING
    t[(CouplingState.REALIGNING, Event.STABILITY_OK)] = CouplingState.LOCKED
    t[(CouplingState.REALIGNING, Event.DIVERGED)] = CouplingState.SEARCH_FIRST_LIGHT
    return t


TRANSITIONS = _build_table()


def legal_next(
    state: CouplingState, event: Event, realign_converged: bool = False
) -> CouplingState | None:
    """The declared table, guard included; None when the event is illegal."""
    nxt = TRANSITIONS.get((state, event))
    if nxt is None:
        return None
    if state is CouplingState.REALIGNING and event is Event.STABILITY_OK:
        return CouplingState.LOCKED if realign_converged else None
    return nxt


@dataclass
class FsmContext:
    device_id: str | None = None
    retry_counts: dict[str, int] = field(default_factory=dict)
    entry_timestamp: float = 0.0
    realign_converged: bool = False


class CouplingFsm:
    """Holds the current state plus context, and applies events.

    effect_handler(prev, event, new) runs after every accepted transition;
    the engine hooks route forcing and z retraction there.
    """

    def __init__(
        self,
        now: Callable[[], float] = lambda: 0.0,
        effect_handler: Callable[[CouplingState, Event, CouplingState], None] | None = None,
    ):
        self.state = CouplingState.IDLE
        self.context = FsmContext()
        self._now = now
        self._effect = effect_handler

    def dispatch(self, event: Event, device_id: str | None = None) -> CouplingState:
        nxt = legal_next(self.state, event, self.context.realign_converged)
        if nxt is None:
            log.info("illegal transition: %s in %s", event.value, self.state.value)
            raise IllegalTransition(self.state.value, event.value)
        prev = self.state
        if event is Event.START_COUPLE:
            self.context.device_id = device_id
            self.context.retry_counts = {}
        if prev is CouplingState.REALIGNING and event is Event.FIT_CONVERGED:
            self.context.realign_converged = True
        if nxt is CouplingState.REALIGNING and prev is not CouplingState.REALIGNING:
            self.context.realign_converged = False
        if nxt in (CouplingState.IDLE, CouplingState.FAULT):
            self.context.realign_converged = False
            if nxt is CouplingState.IDLE:
                self.context.device_id = None
        if nxt is not prev:
            self.context.entry_timestamp = self._now()
        self.state = nxt
        if self._effect is not None:
            self._effect(prev, event, nxt)
        return nxt

    def can(self, event: Event) -> bool:
        return legal_next(self.state, event, self.context.realign_converged) is not None
