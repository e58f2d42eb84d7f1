"""Ground-truth state of the simulated bench and its driver adapters.

One SimWorld instance backs all eight instrument roles. Simulated time is
owned by the world's clock and advanced by the operations themselves (a
power read costs one sample period, a move one settle period), so power
timestamps strictly increase and drift integrates realistically during
scans. All randomness derives from SimConfig.seed through independent
per-consumer streams, making every power and pixel sequence reproducible
from the seed and the call sequence alone.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DriverFault
from ..hal.axes import Axis, AxisId, Tower
from ..hal.drivers import (
    CameraDriver,
    DaqDriver,
    GoniometerDriver,
    InstrumentRole,
    PolarizationDriver,
    PowerMeterDriver,
    StageDriver,
    SwitchDriver,
    TempControllerDriver,
    register_driver_factory,
)
from ..hal.signals import SwitchRoute
from .clock import SimClock
from .config import SimConfig
from .model import AxisMotion, DriftState, apply_stage_step, coupled_power_two_facet, step_drift
from .render import make_noise_field, render_frame_pixels
from .scene import Scene, default_scene

SAMPLE_PERIOD_S = 0.1
MOVE_SETTLE_S = 0.05
FRAME_PERIOD_S = 0.05

_SIDE_FOR_TOWER = {Tower.LEFT_FIBER: "left", Tower.RIGHT_FIBER: "right"}
# contributions from couplers further than this are below double precision
_COUPLER_CUTOFF_UM = 30.0


class _TowerTruth:
    def __init__(self, x: float, y: float, z: float):
        self.motion = {
            Axis.X: AxisMotion(true_position=x),
            Axis.Y: AxisMotion(true_position=y),
            Axis.Z: AxisMotion(true_position=z),
        }
        self.drift = DriftState()


class SimWorld:
    def __init__(
        self,
        cfg: SimConfig | None = None,
        scene: Scene | None = None,
        clock: SimClock | None = None,
    ):
        self.cfg = cfg or SimConfig()
        self.scene = scene or default_scene()
        self.clock = clock or SimClock()

        streams = np.random.SeedSequence(self.cfg.seed).spawn(4)
        self.rng_power = np.random.default_rng(streams[0])
        self.rng_steps = np.random.default_rng(streams[1])
        self.rng_drift = np.random.default_rng(streams[2])
        self.rng_daq = np.random.default_rng(streams[3])

        in1, out1 = self.scene.couplers_for(self.scene.couplers[0].device_id)
        lx, ly = self.scene.tip_target(in1)
        rx, ry = self.scene.tip_target(out1)
        park_z = -40.0
        self.towers = {
            "left": _TowerTruth(lx, ly, park_z),
            "right": _TowerTruth(rx, ry, park_z),
        }
        self.chip_motion = {Axis.X: AxisMotion(), Axis.Y: AxisMotion()}
        self.microscope = {Axis.X: 0.0, Axis.Y: 0.0, Axis.Z: 0.0}
        self.goniometer_deg = 0.0
        self.paddles_deg = (0.0, 0.0, 0.0)
        self.route = SwitchRoute.POWER_METER
        self.temp_setpoint_k = 295.0
        self.laser_on = True
        self.drift_enabled = True
        self.exposure_counter = 0
        self._noise_field = make_noise_field(
            (self.scene.frame_height, self.scene.frame_width),
            self.cfg.render_noise,
            self.cfg.seed,
        )

    # -- time & drift ---------------------------------------------------

    def _advance_drift(self) -> None:
        if not self.drift_enabled:
            return
        now = self.clock.now()
        for tower in self.towers.values():
            dt = now - tower.drift.last_update
            if dt > 0:
                tower.drift = step_drift(tower.drift, dt, self.cfg, self.rng_drift)

    # -- ground truth queries --------------------------------------------

    def tip_world(self, side: str) -> tuple[float, float, float]:
        """True lateral (x, y) and approach z of one tip, drift and tilt in."""
        self._advance_drift()
        t = self.towers[side]
        tilt_dy = self.cfg.tilt_coupling_um_per_deg * self.goniometer_deg
        return (
            t.motion[Axis.X].true_position + t.drift.dx,
            t.motion[Axis.Y].true_position + t.drift.dy + tilt_dy,
            t.motion[Axis.Z].true_position,
        )

    def chip_offset(self) -> tuple[float, float]:
        return (
            self.chip_motion[Axis.X].true_position,
            self.chip_motion[Axis.Y].true_position,
        )

    def true_power(self, noisy: bool = True) -> float:
        """Fiber-chip-fiber power summed over all device waveguides; beyond
        the cutoff the Gaussian factor underflows, so only the nearest pair
        contributes."""
        tin = self.tip_world("left")
        tout = self.tip_world("right")
        cdx, cdy = self.chip_offset()
        cutoff_sq = _COUPLER_CUTOFF_UM**2

        by_dev: dict[str, dict[str, tuple[float, float]]] = {}
        for c in self.scene.couplers:
            tx, ty = self.scene.tip_target(c)
            by_dev.setdefault(c.device_id, {})[c.port] = (tx + cdx, ty + cdy)

        total = 0.0
        best = 0.0
        for ports in by_dev.values():
            if "in" not in ports or "out" not in ports:
                continue
            din = (tin[0] - ports["in"][0], tin[1] - ports["in"][1], tin[2])
            dout = (tout[0] - ports["out"][0], tout[1] - ports["out"][1], tout[2])
            if din[0] ** 2 + din[1] ** 2 > cutoff_sq or dout[0] ** 2 + dout[1] ** 2 > cutoff_sq:
                continue
            p = coupled_power_two_facet(din, dout, self.paddles_deg[0], self.cfg, None, self.laser_on)
            total += p - self.cfg.p_dark_w
            best = max(best, p - self.cfg.p_dark_w)
        signal = total
        if noisy and self.cfg.sigma_rel > 0:
            signal *= 1.0 + self.cfg.sigma_rel * self.rng_power.standard_normal()
        return self.cfg.p_dark_w + max(signal, 0.0)

    def optimum_power(self) -> float:
        """Noiseless peak with both facets and polarization perfect."""
        return self.cfg.p_dark_w + self.cfg.p_in_w * self.cfg.eta0**2

    def true_lateral_error(self, side: str, device_id: str) -> float:
        """Distance from the tip to its optimal lateral position, in um."""
        cin, cout = self.scene.couplers_for(device_id)
        site = cin if side == "left" else cout
        tx, ty = self.scene.tip_target(site)
        cdx, cdy = self.chip_offset()
        wx, wy, _ = self.tip_world(side)
        return math.hypot(wx - (tx + cdx), wy - (ty + cdy))

    # -- test/setup hooks -------------------------------------------------

    def place_tower(self, side: str, x: float, y: float, z: float) -> None:
        """Teleport a tower's true position (setup only, resets backlash)."""
        t = self.towers[side]
        for axis, value in ((Axis.X, x), (Axis.Y, y), (Axis.Z, z)):
            t.motion[axis] = AxisMotion(true_position=value)

    def displace_tower(self, side: str, dx: float, dy: float, dz: float) -> None:
        t = self.towers[side]
        t.motion[Axis.X].true_position += dx
        t.motion[Axis.Y].true_position += dy
        t.motion[Axis.Z].true_position += dz

    # -- scene snapshot ----------------------------------------------------

    def make_scene_snapshot(self) -> Scene:
        self._advance_drift()
        snap = Scene(
            chip_center=self.scene.chip_center,
            chip_size=self.scene.chip_size,
            couplers=list(self.scene.couplers),
            pixels_per_um=self.scene.pixels_per_um,
            frame_width=self.scene.frame_width,
            frame_height=self.scene.frame_height,
            standoff_um=self.scene.standoff_um,
            contact_plane_z=self.scene.contact_plane_z,
            scene_margin_um=self.scene.scene_margin_um,
        )
        cdx, cdy = self.chip_offset()
        if cdx or cdy:
            from .scene import CouplerSite

            snap.couplers = [
                CouplerSite(c.device_id, c.port, c.x + cdx, c.y + cdy) for c in snap.couplers
            ]
        snap.chip_center = (self.scene.chip_center[0] + cdx, self.scene.chip_center[1] + cdy)
        for side in ("left", "right"):
            snap.fiber_tips[side] = self.tip_world(side)
        return snap


# -- driver adapters ----------------------------------------------------


class SimStageDriver(StageDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def step(self, axis: AxisId, requested_delta: float) -> None:
        w = self.world
        w.clock.advance(MOVE_SETTLE_S)
        if axis.tower in _SIDE_FOR_TOWER:
            motion = w.towers[_SIDE_FOR_TOWER[axis.tower]].motion[axis.axis]
            apply_stage_step(motion, requested_delta, w.cfg, w.rng_steps)
        elif axis.tower is Tower.CHIPLET_STAGE:
            apply_stage_step(w.chip_motion[axis.axis], requested_delta, w.cfg, w.rng_steps)
        elif axis.tower is Tower.MICROSCOPE:
            # encoder-equipped motors: closed loop, exact
            w.microscope[axis.axis] += requested_delta
        else:
            raise DriverFault(f"stage driver does not own {axis}")

    def settled(self, axis: AxisId) -> bool:
        return True


class SimPowerMeter(PowerMeterDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def read_watts(self) -> float:
        self.world.clock.advance(SAMPLE_PERIOD_S)
        return self.world.true_power(noisy=True)


class SimSwitch(SwitchDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def set_route(self, route: SwitchRoute) -> None:
        self.world.route = route

    def route(self) -> SwitchRoute:
        return self.world.route


class SimPolarization(PolarizationDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def set_paddles(self, angles_deg: tuple[float, float, float]) -> None:
        self.world.paddles_deg = tuple(angles_deg)


class SimCamera(CameraDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def grab(self) -> tuple[np.ndarray, tuple[float, float, float]]:
        w = self.world
        w.clock.advance(FRAME_PERIOD_S)
        encoder = (w.microscope[Axis.X], w.microscope[Axis.Y], w.microscope[Axis.Z])
        pixels = render_frame_pixels(
            w.make_scene_snapshot(), (encoder[0], encoder[1]), w._noise_field
        )
        w.exposure_counter += 1
        return pixels, encoder


class SimTempController(TempControllerDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def set_setpoint(self, kelvin: float) -> None:
        self.world.temp_setpoint_k = kelvin

    def setpoint(self) -> float:
        return self.world.temp_setpoint_k


class SimDaq(DaqDriver):
    """Placeholder time-series source: a seeded sinusoid plus noise whose
    amplitude follows the currently coupled optical power."""

    def __init__(self, world: SimWorld):
        self.world = world

    def acquire(self, kind: str, duration_s: float, params: dict) -> np.ndarray:
        w = self.world
        amplitude = w.true_power(noisy=False) / w.optimum_power()
        if kind == "frequency_counter":
            gate = float(params.get("gate_time_s", 1.0))
            n = max(int(round(duration_s / gate)), 1)
            f0 = float(params.get("center_hz", 1e6))
            readings = f0 * (1.0 + 1e-7 * w.rng_daq.standard_normal(n))
            w.clock.advance(duration_s)
            return readings
        rate = float(params.get("sample_rate_hz", 1000.0))
        n = max(int(round(duration_s * rate)), 1)
        t = np.arange(n) / rate
        f_sig = float(params.get("signal_hz", 50.0))
        trace = amplitude * np.sin(2 * np.pi * f_sig * t) + 0.01 * w.rng_daq.standard_normal(n)
        w.clock.advance(duration_s)
        if kind == "spectrum_analyzer":
            spectrum = np.abs(np.fft.rfft(trace)) / n
            return spectrum
        return trace


class SimGoniometer(GoniometerDriver):
    def __init__(self, world: SimWorld):
        self.world = world

    def set_angle(self, angle_deg: float) -> None:
        self.world.clock.advance(MOVE_SETTLE_S)
        self.world.goniometer_deg = angle_deg


def register_sim_drivers(world: SimWorld, name: str = "simbench") -> None:
    """Register all eight role factories, sharing one world."""
    register_driver_factory(name, InstrumentRole.STAGE, lambda: SimStageDriver(world))
    register_driver_factory(name, InstrumentRole.POWER_METER, lambda: SimPowerMeter(world))
    register_driver_factory(name, InstrumentRole.SWITCH, lambda: SimSwitch(world))
    register_driver_factory(name, InstrumentRole.POLARIZATION, lambda: SimPolarization(world))
    register_driver_factory(name, InstrumentRole.CAMERA, lambda: SimCamera(world))
    register_driver_factory(name, InstrumentRole.TEMP_CONTROLLER, lambda: SimTempController(world))
    register_driver_factory(name, InstrumentRole.DAQ, lambda: SimDaq(world))
    register_driver_factory(name, InstrumentRole.GONIOMETER, lambda: SimGoniometer(world))


def sim_axis_states(world: SimWorld):
    """Axis soft limits sized for the default scene, with commanded positions
    seeded from the world's true park positions so the first relative move
    computes the right delta."""
    from ..hal.axes import AxisState
    from ..hal.axes import all_axes

    limits = {
        Tower.LEFT_FIBER: {Axis.X: (-420.0, 420.0), Axis.Y: (-420.0, 420.0), Axis.Z: (-60.0, 8.0)},
        Tower.RIGHT_FIBER: {Axis.X: (-420.0, 420.0), Axis.Y: (-420.0, 420.0), Axis.Z: (-60.0, 8.0)},
        Tower.CHIPLET_STAGE: {Axis.X: (-400.0, 400.0), Axis.Y: (-400.0, 400.0)},
        Tower.MICROSCOPE: {Axis.X: (-500.0, 500.0), Axis.Y: (-500.0, 500.0), Axis.Z: (-500.0, 500.0)},
        Tower.GONIOMETER: {Axis.THETA: (0.0, 10.0)},
    }
    states = {}
    for aid in all_axes():
        pos = 0.0
        if aid.tower in _SIDE_FOR_TOWER:
            side = _SIDE_FOR_TOWER[aid.tower]
            pos = world.towers[side].motion[aid.axis].true_position
        states[aid] = AxisState(
            commanded_position=pos,
            estimated_position=pos,
            soft_limits=limits[aid.tower][aid.axis],
        )
    return states


def make_bench(world: SimWorld, name: str = "simbench"):
    """Convenience wiring: register sim drivers, bind all roles, return a Bench."""
    from ..hal.bench import Bench
    from ..hal.drivers import DriverRegistry

    register_sim_drivers(world, name)
    registry = DriverRegistry()
    for role in InstrumentRole:
        registry.bind(role, name)
    return Bench(registry, axis_states=sim_axis_states(world), now=world.clock.now)
