"""State machine tests: declared-table equivalence and safety properties."""

import pytest

from atomics.align import CouplingFsm, CouplingState, Event, legal_next
from atomics.errors import IllegalTransition


def test_idle_start_couple_edge():
    fsm = CouplingFsm()
    assert fsm.dispatch(Event.START_COUPLE, device_id="D1") is CouplingState.COARSE_ALIGN
    assert fsm.context.device_id == "D1"


def test_absent_edge_raises_and_preserves_state():
    fsm = CouplingFsm()
    fsm.state = CouplingState.SEARCH_FIRST_LIGHT
    with pytest.raises(IllegalTransition):
        fsm.dispatch(Event.STABILITY_OK)
    assert fsm.state is CouplingState.SEARCH_FIRST_LIGHT


def test_happy_path_ends_locked():
    fsm = CouplingFsm()
    for event in (
        Event.START_COUPLE,
        Event.FIT_CONVERGED,   # coarse done
        Event.FIT_CONVERGED,   # approach done
        Event.FIRST_LIGHT_FOUND,
        Event.FIT_CONVERGED,   # fine align converged
        Event.POL_DONE,
        Event.STABILITY_OK,
    ):
        fsm.dispatch(event)
    assert fsm.state is CouplingState.LOCKED


def test_exhaustive_table_equivalence():
    """Brute force over every (state, event, guard) triple: dispatch behaves
    exactly as the declared table."""
    for state in CouplingState:
        for event in Event:
            for guard in (False, True):
                fsm = CouplingFsm()
                fsm.state = state
                fsm.context.realign_converged = guard
                expected = legal_next(state, event, guard)
                if expected is None:
                    with pytest.raises(IllegalTransition):
                        fsm.dispatch(event)
                    assert fsm.state is state
                else:
                    assert fsm.dispatch(event) is expected


def test_fault_reachable_from_every_state():
    for state in CouplingState:
        assert legal_next(state, Event.FAULT_RAISED) is CouplingState.FAULT


def test_abort_and_reset_reach_idle_from_every_state():
    for state in CouplingState:
        assert legal_next(state, Event.ABORT) is CouplingState.IDLE
        assert legal_next(state, Event.RESET) is CouplingState.IDLE


def test_realigning_guard():
    fsm = CouplingFsm()
    fsm.state = CouplingState.REALIGNING
    with pytest.raises(IllegalTransition):
        fsm.dispatch(Event.STABILITY_OK)  # no FitConverged yet
    fsm.dispatch(Event.FIT_CONVERGED)
    assert fsm.state is CouplingState.REALIGNING
    assert fsm.dispatch(Event.STABILITY_OK) is CouplingState.LOCKED


def test_drift_alarm_only_from_locked():
    for state in CouplingState:
        expected = CouplingState.REALIGNING if state is CouplingState.LOCKED else None
        assert legal_next(state, Event.DRIFT_ALARM) is expected


def test_effect_handler_invoked():
    seen = []
    fsm = CouplingFsm(effect_handler=lambda prev, ev, new: seen.append((prev, ev, new)))
    fsm.dispatch(Event.START_COUPLE)
    assert seen == [
        (CouplingState.IDLE, Event.START_COUPLE, CouplingState.COARSE_ALIGN)
    ]
