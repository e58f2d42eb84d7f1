"""The serialized bench facade.

All hardware commands pass through one lock-guarded command path (one
writer); telemetry fans out to registered listeners. Driver faults are
retried once before escalating, per the bench fault policy.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable

from ..errors import AxisBusy, DriverFault, LimitViolation, OutOfRange, WrongRoute
from .axes import Axis, AxisId, AxisState, default_axis_states
from .drivers import DriverRegistry, InstrumentRole
from .signals import Frame, MoveAck, PowerSample, SwitchRoute

log = logging.getLogger(__name__)


class Bench:
    def __init__(
        self,
        registry: DriverRegistry,
        axis_states: dict[AxisId, AxisState] | None = None,
        now: Callable[[], float] = time.monotonic,
        uncertainty_rel: float = 0.02,
    ):
        self.registry = registry
        self.axes = axis_states if axis_states is not None else default_axis_states()
        self.now = now
        self.uncertainty_rel = uncertainty_rel
        self._lock = threading.RLock()
        self._route = SwitchRoute.POWER_METER
        self._paddles = (0.0, 0.0, 0.0)
        self._exposure_id = 0
        self._last_power_ts = float("-inf")
        self._power_listeners: list[Callable[[PowerSample], None]] = []

    # -- wiring -----------------------------------------------------------

    def add_power_listener(self, fn: Callable[[PowerSample], None]) -> None:
        self._power_listeners.append(fn)

    def _driver(self, role: InstrumentRole):
        return self.registry.get(role)

    def _with_retry(self, fn, *args):
        """Drivers get one retry on a transient fault, then we escalate."""
        try:
            return fn(*args)
        except DriverFault:
            log.warning("driver fault, retrying once: %s", fn)
            try:
                return fn(*args)
            except DriverFault as exc:
                raise DriverFault(f"driver fault persisted after retry: {exc}") from exc

    # -- operations ---------------------------------------------------------

    def move_absolute(self, axis: AxisId, target: float) -> MoveAck:
        with self._lock:
            state = self.axes[axis]
            if not state.within_limits(target):
                raise LimitViolation(
                    f"{axis}: target {target} outside limits {state.soft_limits}"
                )
            if state.moving:
                raise AxisBusy(f"{axis} has a move pending")
            delta = target - state.commanded_position
            role = (
                InstrumentRole.GONIOMETER if axis.axis is Axis.THETA else InstrumentRole.STAGE
            )
            state.moving = True
            try:
                if role is InstrumentRole.GONIOMETER:
                    self._with_retry(self._driver(role).set_angle, target)
                else:
                    self._with_retry(self._driver(role).step, axis, delta)
            finally:
                state.moving = False
            state.commanded_position = target
            state.estimated_position = target
            state.uncertainty_um += self.uncertainty_rel * abs(delta)
            return MoveAck(axis_id=str(axis), target=target)

    def move_relative(self, axis: AxisId, delta: float) -> MoveAck:
        with self._lock:
            return self.move_absolute(axis, self.axes[axis].commanded_position + delta)

    def read_power(self) -> PowerSample:
        with self._lock:
            if self._route is not SwitchRoute.POWER_METER:
                raise WrongRoute("switch routes light to the DAQ; the meter is blind")
            watts = self._with_retry(self._driver(InstrumentRole.POWER_METER).read_watts)
            ts = max(self.now(), self._last_power_ts + 1e-9)
            self._last_power_ts = ts
            sample = PowerSample(timestamp=ts, power=max(watts, 0.0), route=self._route)
        for listener in self._power_listeners:
            listener(sample)
        return sample

    def set_switch(self, route: SwitchRoute) -> None:
        with self._lock:
            self._with_retry(self._driver(InstrumentRole.SWITCH).set_route, route)
            self._route = route

    @property
    def route(self) -> SwitchRoute:
        return self._route

    def set_polarization(self, paddle_angles: tuple[float, float, float]) -> None:
        for a in paddle_angles:
            if not 0.0 <= a < 360.0:
                raise OutOfRange(f"paddle angle {a} outside [0, 360)")
        with self._lock:
            self._with_retry(
                self._driver(InstrumentRole.POLARIZATION).set_paddles, tuple(paddle_angles)
            )
            self._paddles = tuple(paddle_angles)

    @property
    def paddles(self) -> tuple[float, float, float]:
        return self._paddles

    def grab_frame(self) -> Frame:
        with self._lock:
            pixels, encoder = self._with_retry(self._driver(InstrumentRole.CAMERA).grab)
            self._exposure_id += 1
            return Frame(
                width=pixels.shape[1],
                height=pixels.shape[0],
                pixel_data=pixels,
                camera_encoder=encoder,
                exposure_id=self._exposure_id,
            )

    def register_driver(self, role: InstrumentRole, name: str, **params) -> None:
        with self._lock:
            self.registry.bind(role, name, **params)

    def acquire_daq(self, kind: str, duration_s: float, params: dict):
        with self._lock:
            return self._with_retry(
                self._driver(InstrumentRole.DAQ).acquire, kind, duration_s, params
            )

    def set_temperature(self, kelvin: float) -> None:
        with self._lock:
            self._with_retry(self._driver(InstrumentRole.TEMP_CONTROLLER).set_setpoint, kelvin)

    def commanded(self, axis: AxisId) -> float:
        return self.axes[axis].commanded_position
