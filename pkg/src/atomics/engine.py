"""The assembled system: config -> bench + vision + controller + monitor,
one command path, run-directory persistence, and the telemetry fan-out the
service builds on.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .align import AlignConfig, CouplingController, CouplingFsm, CouplingState, Event
from .campaign.layout import ChipLayout, default_layout
from .config import SystemConfig
from .errors import (
    ConfigError,
    IllegalInState,
    OutOfRange,
    UnknownDriver,
)
from .hal.axes import Axis, AxisId, Tower
from .hal.bench import Bench
from .hal.drivers import DriverRegistry, InstrumentRole
from .hal.signals import SwitchRoute
from .monitor import (
    AlarmLog,
    CusumState,
    EwmaState,
    RealignAction,
    TelemetryLog,
    cusum_update,
    estimate_sigma,
    ewma_update,
    realign_decision,
)
from .simbench import SimClock, SimWorld
from .simbench.scene import CouplerSite, Scene
from .simbench.world import make_bench, register_sim_drivers, sim_axis_states
from .vision.calibrate import CalibrationRecord, calibrate
from .vision.detect import detect
from .vision.system import VisionSystem
from .vision.templates import default_templates, load_templates
from .vision.types import DetClass

log = logging.getLogger(__name__)

CALIBRATION_PROBE_UM = 20.0
RETRACT_ON_ABORT_UM = 20.0


def scene_from_layout(layout: ChipLayout, n_fallback: int = 8) -> Scene:
    scene = Scene(chip_center=(0.0, 0.0), chip_size=layout.extent_um)
    for d in layout.devices:
        scene.couplers.append(CouplerSite(d.device_id, "in", *d.input_coupler))
        scene.couplers.append(CouplerSite(d.device_id, "out", *d.output_coupler))
    return scene


class EventBus:
    """Sequenced fan-out point for telemetry events."""

    def __init__(self):
        self._seq = 0
        self._subs: list[Callable[[dict], None]] = []
        self._lock = threading.Lock()

    def subscribe(self, fn: Callable[[dict], None]) -> None:
        self._subs.append(fn)

    def publish(self, kind: str, payload: dict) -> None:
        with self._lock:
            self._seq += 1
            event = {"kind": kind, "sequence": self._seq, "payload": payload}
        for fn in list(self._subs):
            fn(event)


@dataclass
class HoldStats:
    duration_s: float = 0.0
    samples: int = 0
    in_band: int = 0
    alarms: int = 0
    alarms_resolved: int = 0
    faults: int = 0
    reference_w: float = 0.0

    @property
    def in_band_fraction(self) -> float:
        return self.in_band / self.samples if self.samples else 0.0


class Engine:
    """Synchronous core; the service wraps it with threads."""

    def __init__(
        self,
        config: SystemConfig | None = None,
        layout: ChipLayout | None = None,
        run_dir: str | Path | None = None,
    ):
        self.config = config or SystemConfig()
        self.config.validate()
        self.layout = layout or default_layout(self.config.n_devices)
        self.clock = SimClock(accel=self.config.time_accel)
        self.bus = EventBus()

        driver_names = set(self.config.drivers.values())
        self.world: SimWorld | None = None
        if "simbench" in driver_names:
            scene = scene_from_layout(self.layout)
            self.world = SimWorld(self.config.sim, scene, self.clock)
            register_sim_drivers(self.world)

        registry = DriverRegistry()
        for role in InstrumentRole:
            name = self.config.drivers[role.value]
            params = self.config.driver_params.get(role.value, {})
            registry.bind(role, name, **params)
        if not registry.complete():
            raise ConfigError(f"unbound driver roles: {registry.missing_roles()}")

        if self.world is not None:
            axis_states = sim_axis_states(self.world)
        else:  # vendor drivers would carry their own topology defaults
            from .hal.axes import default_axis_states

            axis_states = default_axis_states()
        for name, limits in self.config.axis_limits.items():
            axis_states[AxisId.parse(name)].soft_limits = tuple(limits)
        self.bench = Bench(registry, axis_states=axis_states, now=self.clock.now)
        self.bench.add_power_listener(
            lambda s: self.bus.publish(
                "power", {"t": s.timestamp, "power_w": s.power, "route": s.route.value}
            )
        )

        if self.config.template_dir:
            templates = load_templates(self.config.template_dir)
        else:
            templates = default_templates()
        self.vision = VisionSystem(templates, now=self.clock.now)

        # run directory + logs
        stamp = time.strftime("%Y%m%d-%H%M%S")
        self.run_dir = Path(run_dir) if run_dir else Path(self.config.run_root) / stamp
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "datasets").mkdir(exist_ok=True)
        self._events_fh = open(self.run_dir / "events.jsonl", "a")
        self.telemetry_log = TelemetryLog(
            self.run_dir / "telemetry.csv", self.config.monitor.telemetry_decimation
        )
        self.alarm_log = AlarmLog(self.run_dir / "alarms.jsonl")

        self.fsm = CouplingFsm(now=self.clock.now, effect_handler=self._fsm_effect)
        self.controller = CouplingController(
            bench=self.bench,
            fsm=self.fsm,
            cfg=self.config.align,
            vision=self.vision,
            device_lookup=self._device_ports,
            now=self.clock.now,
            log_event=self.log_event,
        )
        self.active_device: str | None = None
        self._last_frame = None

    # -- plumbing ---------------------------------------------------------

    def log_event(self, record: dict) -> None:
        self._events_fh.write(json.dumps(record) + "\n")
        self._events_fh.flush()

    def _device_ports(self, device_id: str) -> dict[str, tuple[float, float]]:
        """Nominal bench positions of a device's couplers, chip stage in."""
        d = self.layout.device(device_id)
        sx = self.bench.commanded(AxisId(Tower.CHIPLET_STAGE, Axis.X))
        sy = self.bench.commanded(AxisId(Tower.CHIPLET_STAGE, Axis.Y))
        return {
            "in": (d.input_coupler[0] + sx, d.input_coupler[1] + sy),
            "out": (d.output_coupler[0] + sx, d.output_coupler[1] + sy),
        }

    def _fsm_effect(self, prev: CouplingState, event: Event, new: CouplingState) -> None:
        self.log_event(
            {
                "t": self.clock.now(),
                "kind": "transition",
                "from": prev.value,
                "event": event.value,
                "to": new.value,
                "power_w": self.controller.last_power_w,
            }
        )
        self.bus.publish("state", {"t": self.clock.now(), "state": new.value})
        if new is CouplingState.IDLE and event in (Event.ABORT, Event.RESET):
            self.bench.set_switch(SwitchRoute.POWER_METER)
            for tower in (Tower.LEFT_FIBER, Tower.RIGHT_FIBER):
                axis = AxisId(tower, Axis.Z)
                state = self.bench.axes[axis]
                target = max(state.commanded_position - RETRACT_ON_ABORT_UM, state.soft_limits[0])
                self.bench.move_absolute(axis, target)
        elif prev is CouplingState.LOCKED and new is not CouplingState.LOCKED:
            if self.bench.route is not SwitchRoute.POWER_METER:
                self.bench.set_switch(SwitchRoute.POWER_METER)

    # -- calibration ------------------------------------------------------------

    def auto_calibrate(self, objective_id: str = "obj-5x") -> CalibrationRecord:
        """Probe the chiplet stage through a square and fit the stage->pixel
        affine from one tracked coupler centroid."""
        self.fsm.dispatch(Event.START_CALIBRATE)
        try:
            ax = AxisId(Tower.CHIPLET_STAGE, Axis.X)
            ay = AxisId(Tower.CHIPLET_STAGE, Axis.Y)
            home = (self.bench.commanded(ax), self.bench.commanded(ay))
            d = CALIBRATION_PROBE_UM
            probes = [(0.0, 0.0), (d, 0.0), (d, d), (0.0, d), (-d, 0.0)]
            correspondences = []
            previous_px = None
            for px_off, py_off in probes:
                self.bench.move_absolute(ax, home[0] + px_off)
                self.bench.move_absolute(ay, home[1] + py_off)
                frame = self.bench.grab_frame()
                dets = [
                    det
                    for det in detect(frame, self.vision.templates)
                    if det.cls is DetClass.EDGE_COUPLER
                ]
                if not dets:
                    raise ConfigError("calibration probe found no coupler")
                if previous_px is None:
                    center = (frame.width / 2, frame.height / 2)
                    chosen = min(dets, key=lambda t: math.dist(t.centroid, center))
                else:
                    chosen = min(dets, key=lambda t: math.dist(t.centroid, previous_px))
                previous_px = chosen.centroid
                correspondences.append(((home[0] + px_off, home[1] + py_off), chosen.centroid))
            self.bench.move_absolute(ax, home[0])
            self.bench.move_absolute(ay, home[1])
            record = CalibrationRecord(
                objective_id=objective_id,
                timestamp=self.clock.now(),
                map2=calibrate(correspondences),
            )
            self.vision.set_calibration(record)
            self.fsm.dispatch(Event.FIT_CONVERGED)
            self.log_event(
                {
                    "t": self.clock.now(),
                    "kind": "calibration",
                    "rms_px": record.map2.rms_residual_px,
                    "condition": record.map2.condition_number,
                }
            )
            return record
        except Exception:
            self.fsm.dispatch(Event.FAULT_RAISED)
            raise

    # -- top-level operations ----------------------------------------------------

    def couple(self, device_id: str):
        self.active_device = device_id
        outcome = self.controller.couple(device_id)
        if not outcome.locked:
            self.active_device = None
        return outcome

    def abort(self) -> None:
        """Reversible stop: flag the controller; if no pipeline is active,
        transition immediately."""
        self.controller.abort_requested.set()
        if self.fsm.state in (CouplingState.IDLE, CouplingState.LOCKED, CouplingState.FAULT):
            self.fsm.dispatch(Event.ABORT)
            self.controller.abort_requested.clear()
            self.active_device = None

    def reset(self) -> None:
        self.fsm.dispatch(Event.RESET)
        self.controller.abort_requested.clear()
        self.active_device = None

    def set_tilt(self, angle_deg: float) -> None:
        """Goniometer move; legal when Idle or Locked. The tilt deflects the
        fiber mounts, which is exactly the disturbance realignment absorbs."""
        if not 0.0 <= angle_deg <= 10.0:
            raise OutOfRange(f"tilt {angle_deg} outside [0, 10] degrees")
        if self.fsm.state not in (CouplingState.IDLE, CouplingState.LOCKED):
            raise IllegalInState(f"tilt not permitted in {self.fsm.state.value}")
        self.bench.move_absolute(AxisId(Tower.GONIOMETER, Axis.THETA), angle_deg)
        self.log_event({"t": self.clock.now(), "kind": "tilt", "angle_deg": angle_deg})

    # -- locked-state monitoring -----------------------------------------------------

    def hold_locked(
        self,
        duration_s: float,
        cadence_hz: float | None = None,
        stats_reference_w: float | None = None,
    ) -> HoldStats:
        """Monitor the lock for duration_s of simulated time: EWMA + CUSUM on
        the power stream, drift alarms dispatched into realignment, telemetry
        decimated to the run directory.

        Every power sample drawn during the hold, including realignment scan
        samples, counts in the in-band statistics against the first lock's
        reference."""
        if self.fsm.state is not CouplingState.LOCKED:
            raise IllegalInState("hold requires the Locked state")
        mon = self.config.monitor
        cadence = cadence_hz or mon.lock_cadence_hz
        interval = 1.0 / cadence

        reference = self.controller.lock_reference_w
        assert reference is not None
        stats = HoldStats(reference_w=stats_reference_w or reference)
        band_floor = stats.reference_w * 10 ** (-self.config.align.lock_threshold_db / 10)

        def stats_listener(sample):
            stats.samples += 1
            stats.in_band += sample.power >= band_floor
            self.telemetry_log.add(
                sample.timestamp, sample.power, self.fsm.state.value, sample.route.value
            )

        self.bench.add_power_listener(stats_listener)

        # noise scale from the first locked samples, robust MAD estimate
        sigma_samples = [
            self.bench.read_power().power for _ in range(mon.sigma_estimate_samples)
        ]
        sigma = estimate_sigma(sigma_samples)
        cusum = CusumState(k=mon.cusum_k_sigma, h=mon.cusum_h_sigma).with_reference(
            reference, sigma
        )
        ewma = EwmaState(lam=mon.ewma_lambda)

        t_end = self.clock.now() + duration_s
        try:
            while self.clock.now() < t_end:
                if self.fsm.state is CouplingState.FAULT:
                    stats.faults += 1
                    break
                gap = interval - 0.1  # a sim power read costs one sample period
                if gap > 0:
                    self.clock.advance(gap)
                power = self.bench.read_power().power
                ewma = ewma_update(ewma, power)
                cusum, alarm = cusum_update(cusum, power)
                if not alarm:
                    continue

                stats.alarms += 1
                action = realign_decision(
                    True, power, self.config.align.first_light_threshold_w
                )
                self.alarm_log.add(
                    {
                        "t": self.clock.now(),
                        "kind": "drift_alarm",
                        "power_w": power,
                        "reference_w": cusum.reference,
                        "action": action.value,
                    }
                )
                self.bus.publish("alarm", {"t": self.clock.now(), "action": action.value})
                self.fsm.dispatch(Event.DRIFT_ALARM)
                if action is RealignAction.FULL_RECOUPLE:
                    self.fsm.dispatch(Event.DIVERGED)
                relocked = self.controller.realign()
                if relocked:
                    stats.alarms_resolved += 1
                    new_ref = self.controller.lock_reference_w
                    sigma = sigma * (new_ref / reference) if reference else sigma
                    reference = new_ref
                    cusum = cusum.with_reference(reference, sigma)
                else:
                    stats.faults += 1
                    break
        finally:
            self.bench._power_listeners.remove(stats_listener)
        stats.duration_s = duration_s
        return stats

    # -- acquisition & state -------------------------------------------------------

    def get_state(self) -> dict:
        axes = {
            str(aid): {
                "commanded": st.commanded_position,
                "estimated": st.estimated_position,
                "uncertainty_um": st.uncertainty_um,
                "limits": list(st.soft_limits),
                "moving": st.moving,
            }
            for aid, st in self.bench.axes.items()
        }
        age = self.vision.calibration_age()
        return {
            "t": self.clock.now(),
            "state": self.fsm.state.value,
            "active_device": self.active_device,
            "route": self.bench.route.value,
            "last_power_w": self.controller.last_power_w,
            "paddles_deg": list(self.bench.paddles),
            "calibration_age_s": age,
            "axes": axes,
            "run_dir": str(self.run_dir),
        }

    def grab_annotated(self):
        frame = self.bench.grab_frame()
        detections = self.vision.annotate(frame)
        self._last_frame = frame
        self.bus.publish(
            "detection",
            {
                "t": self.clock.now(),
                "exposure_id": frame.exposure_id,
                "detections": [d.to_dict() for d in detections],
            },
        )
        return frame, detections

    def close(self) -> None:
        self._events_fh.close()
        self.telemetry_log.close()
        self.alarm_log.close()
