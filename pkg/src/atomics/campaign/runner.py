"""Campaign orchestration: couple -> stabilize -> acquire -> persist ->
retract -> next device, with a resumable JSON report."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..align import CouplingState, Event
from ..errors import AtomicsError, CalibrationStale
from ..hal.axes import Axis, AxisId, Tower
from ..hal.signals import SwitchRoute
from .acquire import AcquisitionSpec, DatasetRef, acquire
from .layout import ChipLayout, DeviceSite

log = logging.getLogger(__name__)

RETRACT_BETWEEN_DEVICES_UM = 20.0


class Traversal(Enum):
    MOVE_CHIPLET = "move_chiplet"
    MOVE_FIBERS = "move_fibers"


@dataclass
class DeviceResult:
    device_id: str
    coupled: bool = False
    insertion_loss_db: float | None = None
    align_duration_s: float = 0.0
    samples_used: int = 0
    acquisitions: list[DatasetRef] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        doc = {
            "device_id": self.device_id,
            "coupled": self.coupled,
            "align_duration_s": self.align_duration_s,
            "samples_used": self.samples_used,
            "acquisitions": [vars(a) for a in self.acquisitions],
            "environment": self.environment,
            "error": self.error,
        }
        if self.coupled:
            doc["insertion_loss_db"] = self.insertion_loss_db
        return doc


@dataclass
class CampaignReport:
    chiplet_id: str
    traversal: str
    devices: list[DeviceResult] = field(default_factory=list)
    started_s: float = 0.0
    finished_s: float = 0.0

    @property
    def all_coupled(self) -> bool:
        return all(d.coupled for d in self.devices)

    def to_dict(self) -> dict:
        return {
            "chiplet_id": self.chiplet_id,
            "traversal": self.traversal,
            "started_s": self.started_s,
            "finished_s": self.finished_s,
            "devices": [d.to_dict() for d in self.devices],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _load_previous(report_path: Path) -> dict[str, dict]:
    if not report_path.exists():
        return {}
    try:
        doc = json.loads(report_path.read_text())
    except json.JSONDecodeError:
        return {}
    return {d["device_id"]: d for d in doc.get("devices", [])}


def _resumable(previous: dict | None) -> bool:
    """A device is skippable when it coupled and all its datasets are still
    on disk with matching hashes."""
    import hashlib

    if not previous or not previous.get("coupled"):
        return False
    for acq in previous.get("acquisitions", []):
        path = Path(acq["path"])
        if not path.exists():
            return False
        if hashlib.sha256(path.read_bytes()).hexdigest() != acq["sha256"]:
            return False
    return True


def _traverse(engine, device: DeviceSite, mode: Traversal, reference: DeviceSite) -> None:
    """Position the bench for a device, fibers retracted during motion."""
    for tower in (Tower.LEFT_FIBER, Tower.RIGHT_FIBER):
        axis = AxisId(tower, Axis.Z)
        state = engine.bench.axes[axis]
        target = max(
            state.commanded_position - RETRACT_BETWEEN_DEVICES_UM, state.soft_limits[0]
        )
        engine.bench.move_absolute(axis, target)
    if mode is Traversal.MOVE_CHIPLET:
        # shift the chiplet so this device lands where the reference device
        # was; the fibers stay near their park lateral positions
        sx = AxisId(Tower.CHIPLET_STAGE, Axis.X)
        sy = AxisId(Tower.CHIPLET_STAGE, Axis.Y)
        engine.bench.move_absolute(sx, reference.input_coupler[0] - device.input_coupler[0])
        engine.bench.move_absolute(sy, reference.input_coupler[1] - device.input_coupler[1])
    else:
        ports = engine._device_ports(device.device_id)
        standoff = engine.config.align.tip_standoff_um
        for side, tower in (("in", Tower.LEFT_FIBER), ("out", Tower.RIGHT_FIBER)):
            sign = -1.0 if side == "in" else 1.0
            x, y = ports[side]
            engine.bench.move_absolute(AxisId(tower, Axis.X), x + sign * standoff)
            engine.bench.move_absolute(AxisId(tower, Axis.Y), y)


def run_campaign(
    engine,
    layout: ChipLayout,
    acq_specs: list[AcquisitionSpec],
    traversal: Traversal = Traversal.MOVE_CHIPLET,
    resume: bool = False,
    fail_fast: bool = False,
    stabilize_s: float = 2.0,
) -> CampaignReport:
    """Iterate devices in column-major order; failures are recorded and the
    campaign continues unless fail_fast. The report persists after every
    device, so an aborted campaign leaves a valid partial report."""
    if engine.vision.calibration is None:
        raise CalibrationStale("campaign requires a valid calibration")
    engine.vision.require_fresh_calibration()

    report_path = Path(engine.run_dir) / "report.json"
    previous = _load_previous(report_path) if resume else {}
    report = CampaignReport(
        chiplet_id=layout.chiplet_id,
        traversal=traversal.value,
        started_s=engine.clock.now(),
    )
    ordered = layout.ordered_devices()
    if not ordered:
        report.finished_s = engine.clock.now()
        report.save(report_path)
        return report
    engine.bench.registry.campaign_active = True
    reference = ordered[0]
    try:
        for device in ordered:
            prev = previous.get(device.device_id)
            if resume and _resumable(prev):
                result = DeviceResult(
                    device_id=device.device_id,
                    coupled=True,
                    insertion_loss_db=prev.get("insertion_loss_db"),
                    align_duration_s=prev.get("align_duration_s", 0.0),
                    samples_used=prev.get("samples_used", 0),
                    acquisitions=[DatasetRef(**a) for a in prev.get("acquisitions", [])],
                    environment=prev.get("environment", {}),
                )
                report.devices.append(result)
                report.save(report_path)
                continue

            result = DeviceResult(device_id=device.device_id)
            result.environment = {
                "pressure_label": engine.config.pressure_label,
                "goniometer_deg": engine.bench.commanded(
                    AxisId(Tower.GONIOMETER, Axis.THETA)
                ),
                "temperature_setpoint_k": getattr(engine.world, "temp_setpoint_k", None)
                if engine.world
                else None,
            }
            try:
                _traverse(engine, device, traversal, reference)
                outcome = engine.couple(device.device_id)
                result.align_duration_s = outcome.duration_s
                result.samples_used = outcome.samples_used
                if outcome.locked:
                    result.coupled = True
                    p_in = engine.config.sim.p_in_w
                    result.insertion_loss_db = 10 * math.log10(p_in / outcome.power_w)
                    engine.bench.set_switch(SwitchRoute.DAQ)
                    try:
                        for i, spec in enumerate(acq_specs):
                            tag = f"{device.device_id}_{spec.kind.value}_{i}"
                            result.acquisitions.append(acquire(engine, spec, tag))
                    finally:
                        engine.bench.set_switch(SwitchRoute.POWER_METER)
                    engine.abort()  # unlock: retract and return to Idle
                else:
                    result.error = outcome.error or "coupling failed"
                    if engine.fsm.state is not CouplingState.IDLE:
                        engine.reset()
            except AtomicsError as exc:
                result.error = str(exc)
                log.warning("device %s failed: %s", device.device_id, exc)
                if engine.fsm.state is not CouplingState.IDLE:
                    engine.reset()
            report.devices.append(result)
            report.save(report_path)
            if fail_fast and not result.coupled:
                break
    finally:
        engine.bench.registry.campaign_active = False
        report.finished_s = engine.clock.now()
        report.save(report_path)
    return report
