"""Phase controller: drives vision coarse alignment, safe approach, spiral
capture, line-scan fine optimization and polarization search, feeding the
state machine and handing a stable lock to the monitor.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import (
    AtomicsError,
    CalibrationStale,
    DetectionLost,
    Diverged,
    DriverFault,
    FlatResponse,
    InvalidFit,
    KeepoutViolation,
    LimitViolation,
    MeterFault,
    WrongRoute,
)
from ..hal.axes import Axis, AxisId, Tower
from ..hal.bench import Bench
from ..vision.system import VisionSystem, _Miss
from ..vision.types import DetClass
from .config import AlignConfig
from .fsm import CouplingFsm, CouplingState, Event
from .scans import ScanResult, fit_log_quadratic, ring_radius, spiral_offsets

log = logging.getLogger(__name__)

SIDE_TOWER = {"left": Tower.LEFT_FIBER, "right": Tower.RIGHT_FIBER}
SIDE_TIP_CLASS = {"left": DetClass.FIBER_TIP_LEFT, "right": DetClass.FIBER_TIP_RIGHT}
APPROACH_START_STEP_UM = 5.0
APPROACH_MIN_STEP_UM = 0.25
DIVERGE_DROP_FACTOR = 10 ** (-3 / 10)  # -3 dB
FINAL_POWER_TOL_DB = 0.05


class AbortRequested(AtomicsError):
    """Operator abort observed between motion commands."""


@dataclass
class AlignmentResult:
    final_offset_estimate_um: float
    power_w: float
    iterations: int
    converged: bool


@dataclass
class CoupleOutcome:
    device_id: str
    locked: bool
    power_w: float = 0.0
    samples_used: int = 0
    duration_s: float = 0.0
    error: str | None = None


class CouplingController:
    def __init__(
        self,
        bench: Bench,
        fsm: CouplingFsm,
        cfg: AlignConfig,
        vision: VisionSystem,
        device_lookup: Callable[[str], dict[str, tuple[float, float]]],
        now: Callable[[], float],
        log_event: Callable[[dict], None] = lambda _: None,
        towers: tuple[str, ...] = ("left", "right"),
    ):
        self.bench = bench
        self.fsm = fsm
        self.cfg = cfg
        self.vision = vision
        self.device_lookup = device_lookup
        self.now = now
        self.log_event = log_event
        self.towers = towers
        self.power_samples = 0
        self.abort_requested = threading.Event()
        self.lock_reference_w: float | None = None
        self.last_power_w = 0.0

    # -- primitives ----------------------------------------------------------

    def _axis(self, side: str, axis: Axis) -> AxisId:
        return AxisId(SIDE_TOWER[side], axis)

    def _check_abort(self) -> None:
        if self.abort_requested.is_set():
            raise AbortRequested("abort requested")

    def read_power(self) -> float:
        self._check_abort()
        sample = self.bench.read_power()
        self.power_samples += 1
        self.last_power_w = sample.power
        return sample.power

    def move(self, axis: AxisId, target: float) -> None:
        self._check_abort()
        self.bench.move_absolute(axis, target)

    def move_anti_backlash(self, axis: AxisId, target: float, overshoot: float = 0.5) -> None:
        """Approach the target from below so the slip-stick deadband is
        consumed before the final step; precision positions then live in
        the same coordinates the ascending scans sampled in. The overshoot
        needs to exceed the worst-case backlash with margin, but no more:
        relative step noise scales with the length of the final hop."""
        lo, _ = self.bench.axes[axis].soft_limits
        staging = max(target - overshoot, lo)
        if self.bench.commanded(axis) > staging:
            self.move(axis, staging)
        self.move(axis, target)

    # -- coarse alignment -------------------------------------------------------

    def coarse_align(self, device_id: str, max_iters: int = 10) -> float:
        """Vision loop: command tower X/Y until the estimated tip-to-target
        offset is inside the deadband. Returns the final vision-estimated
        offset (worst tower) in micrometers.

        A tip that cannot be found with high confidence (typically a lens
        sitting over the chip after a large inward misalignment, where the
        glyphs overlap) triggers an outward retreat to clean background
        before the loop continues."""
        self.vision.require_fresh_calibration()
        ports = self.device_lookup(device_id)
        worst = float("inf")
        retreats = {side: 0 for side in self.towers}
        for _ in range(max_iters):
            self._check_abort()
            frame = self.bench.grab_frame()
            moves: list[tuple[AxisId, float]] = []
            worst = 0.0
            retreated = False
            for side in self.towers:
                sign = -1.0 if side == "left" else 1.0
                try:
                    coupler_hint = ports["in" if side == "left" else "out"]
                    coupler_pos, _ = self.vision.locate(
                        frame, DetClass.EDGE_COUPLER, near_um=coupler_hint
                    )
                    target = (coupler_pos[0] + sign * self.cfg.tip_standoff_um, coupler_pos[1])
                    tip_pos, _ = self.vision.locate(
                        frame, SIDE_TIP_CLASS[side], near_um=target, min_score=0.85
                    )
                except _Miss as miss:
                    if miss.cls is SIDE_TIP_CLASS[side] and retreats[side] < 3:
                        retreats[side] += 1
                        ax = self._axis(side, Axis.X)
                        self.move(ax, self.bench.commanded(ax) + sign * 25.0)
                        retreated = True
                        continue
                    worst = float("inf")
                    retreated = True
                    continue
                off = (target[0] - tip_pos[0], target[1] - tip_pos[1])
                worst = max(worst, math.hypot(*off))
                if math.hypot(*off) > self.cfg.coarse_deadband_um:
                    ax = self._axis(side, Axis.X)
                    ay = self._axis(side, Axis.Y)
                    moves.append((ax, self.bench.commanded(ax) + off[0]))
                    moves.append((ay, self.bench.commanded(ay) + off[1]))
            if retreated:
                continue
            if not moves:
                break
            for axis, target in moves:
                self.move(axis, target)
        self.log_event({"t": self.now(), "kind": "coarse", "offset_um": worst})
        return worst

    # -- z approach ---------------------------------------------------------------

    def safe_approach_z(self, side: str, contact_plane_estimate: float) -> float:
        """Step the fiber toward the chip in geometrically shrinking steps
        (half the remaining gap, capped at 5 um), never crossing the keep-out
        plane; stop when the step falls under 0.25 um or first light shows."""
        axis = self._axis(side, Axis.Z)
        lo, hi = self.bench.axes[axis].soft_limits
        if not (lo <= contact_plane_estimate <= hi):
            raise KeepoutViolation(
                f"contact plane {contact_plane_estimate} outside z limits ({lo}, {hi})"
            )
        allowed = contact_plane_estimate - self.cfg.z_keepout_um
        if allowed < lo:
            raise KeepoutViolation("keep-out leaves no legal approach range")
        z = self.bench.commanded(axis)
        while True:
            gap = allowed - z
            step = min(APPROACH_START_STEP_UM, gap / 2.0)
            if step < APPROACH_MIN_STEP_UM:
                break
            z += step
            self.move(axis, z)
            if self.read_power() > self.cfg.first_light_threshold_w:
                break
        self.log_event({"t": self.now(), "kind": "approach", "side": side, "final_z": z})
        return z

    # -- spiral capture ---------------------------------------------------------

    def spiral_search(self, side: str = "left") -> tuple[float, float] | None:
        """Walk the square spiral outward until the meter crosses the
        first-light threshold; None once the ring radius leaves the search
        budget. The origin is sampled first with zero moves."""
        ax = self._axis(side, Axis.X)
        ay = self._axis(side, Axis.Y)
        origin = (self.bench.commanded(ax), self.bench.commanded(ay))
        visited = 0
        for off in spiral_offsets(self.cfg.spiral_pitch_um):
            if ring_radius(off) > self.cfg.spiral_max_radius_um:
                self.log_event({"t": self.now(), "kind": "spiral", "found": False,
                                "visited": visited})
                return None
            if off != (0.0, 0.0):
                self.move(ax, origin[0] + off[0])
                self.move(ay, origin[1] + off[1])
            visited += 1
            try:
                power = self.read_power()
            except (WrongRoute, DriverFault) as exc:
                raise MeterFault(str(exc)) from exc
            if power > self.cfg.first_light_threshold_w:
                pos = (origin[0] + off[0], origin[1] + off[1])
                self.log_event({"t": self.now(), "kind": "spiral", "found": True,
                                "visited": visited, "position": list(pos)})
                return pos

    # -- line scans and fine alignment ----------------------------------------------

    def line_scan(self, axis: AxisId, center: float, half_range: float, n: int) -> ScanResult:
        """Sample power at n equally spaced positions; end at the fitted
        vertex, or back at center when the fit fails. No motion occurs if
        the range leaves the soft limits."""
        if n < 3:
            raise ValueError("scan needs n >= 3")
        state = self.bench.axes[axis]
        if not (state.within_limits(center - half_range) and state.within_limits(center + half_range)):
            raise LimitViolation(
                f"{axis}: scan range {center}+-{half_range} outside {state.soft_limits}"
            )
        positions = np.linspace(center - half_range, center + half_range, n)
        powers = np.empty(n)
        for i, pos in enumerate(positions):
            if i == 0:
                self.move_anti_backlash(axis, float(pos))
            else:
                self.move(axis, float(pos))  # ascending: no direction reversal
            powers[i] = self.read_power()
        scan = ScanResult(axis_id=str(axis), positions=positions, powers=powers)
        try:
            vertex = fit_log_quadratic(scan, self.cfg.dark_floor_w)
            self.move_anti_backlash(axis, vertex)
        except InvalidFit:
            self.move_anti_backlash(axis, center)
        self.log_event(
            {
                "t": self.now(),
                "kind": "scan",
                "axis": str(axis),
                "positions": [round(float(p), 4) for p in positions],
                "powers": [float(p) for p in powers],
                "vertex": scan.fit.vertex if scan.fit else None,
            }
        )
        return scan

    def _scan_axis(self, axis: AxisId, half_range: float) -> tuple[float, ScanResult]:
        """One scan plus the hill-climb fallback: when the peak lies outside
        the scanned range (monotone powers), step to the best sample instead
        of staying at center. The window clamps to the soft limits and, on
        approach axes, to the keep-out plane. Returns (correction, scan)."""
        lo, hi = self.bench.axes[axis].soft_limits
        if axis.axis is Axis.Z:
            hi = min(hi, self.cfg.contact_plane_um - self.cfg.z_keepout_um)
        start = self.bench.commanded(axis)
        half = min(half_range, (hi - lo) / 2)
        # prefer shrinking the window symmetrically around the current
        # position; an off-center window biases the vertex of the (only
        # locally quadratic) axial profile
        half_sym = min(half, hi - start, start - lo)
        if half_sym >= 0.3 * half:
            center, half = start, half_sym
        else:
            center = min(max(start, lo + half), hi - half)
        scan = self.line_scan(axis, center, half, self.cfg.scan_points)
        if scan.fit is None:
            best_pos = scan.argmax_position()
            if scan.monotone() and abs(best_pos - center) > 1e-12:
                self.move_anti_backlash(axis, best_pos)
        return abs(self.bench.commanded(axis) - start), scan

    def fine_align(self, profile: str = "initial") -> AlignmentResult:
        """Rounds of per-axis scan+fit over both towers (input then output),
        halving ranges per round, until the largest correction drops under
        the convergence tolerance. The axial scan runs coarser: its curvature
        is Rayleigh-scaled. Raises Diverged when power has fallen more than
        3 dB below the best seen and fits failed twice running."""
        cfg = self.cfg
        if profile == "realign":
            half_lat0, half_z0 = cfg.realign_half_range_um, cfg.realign_z_half_range_um
        else:
            half_lat0, half_z0 = cfg.scan_half_range_um, cfg.z_scan_half_range_um
        # ranges never shrink below a quarter of their start: tighter windows
        # put the curvature under the noise floor and the fitted vertex
        # starts wandering, which stalls convergence
        floor = max(4.0 * cfg.convergence_tol_um, half_lat0 / 4.0)

        # ranges halve per axis only once that axis fits successfully; a
        # hill-climbing axis (peak still outside its window) keeps marching
        # at full range until the peak is bracketed
        half_range: dict[AxisId, float] = {}
        for side in self.towers:
            half_range[self._axis(side, Axis.X)] = half_lat0
            half_range[self._axis(side, Axis.Y)] = half_lat0
            half_range[self._axis(side, Axis.Z)] = half_z0

        # entry guard doubles as the divergence baseline: fine alignment
        # presumes first light, and a silent convergence onto the dark
        # floor must never count as a lock
        entry_power = self.read_power()
        if entry_power <= cfg.first_light_threshold_w:
            raise Diverged(f"no first light at entry ({entry_power:.3g} W)")

        best_power = entry_power
        best_positions: dict[AxisId, float] = {
            self._axis(s, a): self.bench.commanded(self._axis(s, a))
            for s in self.towers
            for a in (Axis.X, Axis.Y, Axis.Z)
        }
        invalid_low = 0
        iterations = 0
        converged = False
        # an axis that lands a sub-tolerance correction is done: the bench
        # wanders a few tens of nanometers per round (drift + step noise),
        # so re-scanning quiescent axes only burns the sample budget. But
        # axial and lateral optima are coupled (the effective waist widens
        # off focus), so any big correction wakes every axis back up.
        active = {axis: True for axis in half_range}
        reactivate_above = 5.0 * cfg.convergence_tol_um

        for round_idx in range(cfg.max_iterations):
            iterations += 1
            max_correction = 0.0
            for side in self.towers:
                for axis_name in (Axis.X, Axis.Y, Axis.Z):
                    axis = self._axis(side, axis_name)
                    if not active[axis]:
                        continue
                    correction, scan = self._scan_axis(axis, half_range[axis])
                    if correction >= reactivate_above:
                        active = {a: True for a in active}
                    # tighten only once the peak sits well inside the window;
                    # a large correction means the optimum is still sliding
                    # (the axial optimum migrates while lateral error decays)
                    if scan.fit is not None and correction <= half_range[axis] / 2:
                        half_range[axis] = max(half_range[axis] / 2, floor)
                    if correction < cfg.convergence_tol_um:
                        active[axis] = False
                    max_correction = max(max_correction, correction)
                    # track the best operating point robustly: the fitted
                    # peak estimate is noise-smoothed, the raw sample max of
                    # a long run is ~3 sigma inflated and sits on the scan
                    # grid rather than at the vertex
                    peak = float(scan.powers.max())
                    peak_est = scan.fit.peak_w if scan.fit is not None else peak
                    if peak_est > best_power:
                        best_power = peak_est
                        best_positions = {
                            self._axis(s, a): self.bench.commanded(self._axis(s, a))
                            for s in self.towers
                            for a in (Axis.X, Axis.Y, Axis.Z)
                        }
                    if scan.fit is None and peak < best_power * DIVERGE_DROP_FACTOR:
                        invalid_low += 1
                        if invalid_low >= 2:
                            raise Diverged(
                                f"power fell to {peak:.3g} W (best {best_power:.3g}) "
                                "with two failed fits"
                            )
                    elif scan.fit is not None:
                        invalid_low = 0
            if not any(active.values()):
                converged = True
                break

        final = float(np.median([self.read_power() for _ in range(5)]))
        if best_power > 0 and final < best_power * 10 ** (-FINAL_POWER_TOL_DB / 10):
            # revisit the best recorded operating point, but keep whichever
            # position actually measures better: under drift the old best
            # may no longer be real
            here = {axis: self.bench.commanded(axis) for axis in best_positions}
            for axis, pos in best_positions.items():
                self.move_anti_backlash(axis, pos)
            final_at_best = float(np.median([self.read_power() for _ in range(5)]))
            if final_at_best < final:
                for axis, pos in here.items():
                    self.move_anti_backlash(axis, pos)
            else:
                final = final_at_best
        return AlignmentResult(
            final_offset_estimate_um=max_correction if not converged else cfg.convergence_tol_um,
            power_w=final,
            iterations=iterations,
            converged=converged,
        )

    # -- polarization -----------------------------------------------------------

    def optimize_polarization(self) -> float:
        """Coarse 12-step scan over 180 degrees, then golden-section
        refinement of the paddle angle. Raises FlatResponse (and restores
        the original angle) when the scan contrast is under 1.05."""
        base = self.bench.paddles
        step = 180.0 / self.cfg.polarization_steps

        def measure(theta: float) -> float:
            self.bench.set_polarization((theta % 360.0, base[1], base[2]))
            return self.read_power()

        angles = [base[0] + i * step for i in range(self.cfg.polarization_steps)]
        powers = [measure(a) for a in angles]
        p_max, p_min = max(powers), min(powers)
        if p_min <= 0 or p_max / p_min < 1.05:
            self.bench.set_polarization(base)
            raise FlatResponse(
                f"polarization contrast {p_max / max(p_min, 1e-30):.3f} < 1.05"
            )
        center = angles[int(np.argmax(powers))]
        lo, hi = center - step, center + step

        # golden-section maximization, one new probe per iteration
        phi = (math.sqrt(5) - 1) / 2
        a, b = lo, hi
        c = b - phi * (b - a)
        d = a + phi * (b - a)
        fc, fd = measure(c), measure(d)
        while b - a > 0.8:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = measure(c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = measure(d)
        theta_star = (a + b) / 2 % 360.0
        self.bench.set_polarization((theta_star, base[1], base[2]))
        self.log_event({"t": self.now(), "kind": "polarization", "theta_deg": theta_star})
        return theta_star

    # -- stability ----------------------------------------------------------------

    def gather_window(self, n: int | None = None) -> list[float]:
        n = n or self.cfg.stability_window
        return [self.read_power() for _ in range(n)]

    # -- full pipeline ---------------------------------------------------------------

    def couple(self, device_id: str) -> CoupleOutcome:
        """Run the state machine from Idle to Locked for one device."""
        from ..monitor import StabilityVerdict, stability_check

        t0 = self.now()
        samples0 = self.power_samples
        retries: dict[str, int] = {}
        outcome = CoupleOutcome(device_id=device_id, locked=False)

        def fail(phase: str, exc: Exception | str) -> bool:
            """Consume one retry; dispatch FaultRaised when exhausted."""
            retries[phase] = retries.get(phase, 0) + 1
            if retries[phase] > self.cfg.retries_per_phase:
                outcome.error = f"{phase}: {exc}"
                self.fsm.dispatch(Event.FAULT_RAISED)
                return True
            return False

        try:
            self.fsm.dispatch(Event.START_COUPLE, device_id=device_id)
            while self.fsm.state not in (
                CouplingState.LOCKED,
                CouplingState.FAULT,
                CouplingState.IDLE,
            ):
                state = self.fsm.state
                if state is CouplingState.COARSE_ALIGN:
                    try:
                        offset = self.coarse_align(device_id)
                    except (DetectionLost, CalibrationStale) as exc:
                        if fail("coarse", exc):
                            continue
                        continue
                    if offset <= self.cfg.coarse_target_um:
                        self.fsm.dispatch(Event.FIT_CONVERGED)
                    elif fail("coarse", f"residual {offset:.2f} um"):
                        continue
                elif state is CouplingState.SAFE_APPROACH:
                    try:
                        for side in self.towers:
                            self.safe_approach_z(side, self.cfg.contact_plane_um)
                        self.fsm.dispatch(Event.FIT_CONVERGED)
                    except KeepoutViolation as exc:
                        if fail("approach", exc):
                            continue
                elif state is CouplingState.SEARCH_FIRST_LIGHT:
                    try:
                        found = self.spiral_search(self.towers[0])
                    except MeterFault as exc:
                        if fail("search", exc):
                            continue
                        continue
                    if found is not None:
                        self.fsm.dispatch(Event.FIRST_LIGHT_FOUND)
                    elif fail("search", "spiral exhausted"):
                        continue
                elif state is CouplingState.FINE_ALIGN:
                    try:
                        result = self.fine_align("initial")
                        self.fsm.dispatch(Event.FIT_CONVERGED)
                        outcome.power_w = result.power_w
                    except Diverged as exc:
                        if fail("fine", exc):
                            continue
                        self.fsm.dispatch(Event.DIVERGED)
                elif state is CouplingState.POLARIZATION_OPT:
                    try:
                        self.optimize_polarization()
                    except FlatResponse as exc:
                        self.log_event({"t": self.now(), "kind": "warning", "msg": str(exc)})
                    self.fsm.dispatch(Event.POL_DONE)
                    window = self.gather_window()
                    reference = float(np.median(window))
                    verdict = stability_check(window, reference, self.cfg.lock_threshold_db)
                    if verdict.stable:
                        self.lock_reference_w = reference
                        outcome.power_w = reference
                        self.fsm.dispatch(Event.STABILITY_OK)
                    elif fail("stability", f"rsd {verdict.window_rsd:.4f}"):
                        continue
        except AbortRequested:
            self.fsm.dispatch(Event.ABORT)
            outcome.error = "aborted"

        outcome.locked = self.fsm.state is CouplingState.LOCKED
        outcome.samples_used = self.power_samples - samples0
        outcome.duration_s = self.now() - t0
        return outcome

    def realign(self) -> bool:
        """Drift-alarm recovery: trimmed fine alignment, then restabilize.
        Call with the machine in Realigning. Falls back to a full re-search
        if the trimmed alignment diverges. Returns True when Locked again."""
        from ..monitor import stability_check

        retries = 0
        while self.fsm.state is CouplingState.REALIGNING:
            try:
                self.fine_align("realign")
                self.fsm.dispatch(Event.FIT_CONVERGED)
            except Diverged:
                self.fsm.dispatch(Event.DIVERGED)
                break
            window = self.gather_window()
            reference = float(np.median(window))
            verdict = stability_check(window, reference, self.cfg.lock_threshold_db)
            if verdict.stable:
                self.lock_reference_w = reference
                self.fsm.dispatch(Event.STABILITY_OK)
                return True
            retries += 1
            if retries > self.cfg.retries_per_phase:
                self.fsm.dispatch(Event.FAULT_RAISED)
                return False
        # diverged into the capture pipeline: spiral onward to re-lock
        while self.fsm.state not in (
            CouplingState.LOCKED,
            CouplingState.FAULT,
            CouplingState.IDLE,
        ):
            state = self.fsm.state
            if state is CouplingState.SEARCH_FIRST_LIGHT:
                found = self.spiral_search(self.towers[0])
                if found is not None:
                    self.fsm.dispatch(Event.FIRST_LIGHT_FOUND)
                else:
                    self.fsm.dispatch(Event.FAULT_RAISED)
            elif state is CouplingState.FINE_ALIGN:
                try:
                    self.fine_align("initial")
                    self.fsm.dispatch(Event.FIT_CONVERGED)
                except Diverged:
                    retries += 1
                    if retries > self.cfg.retries_per_phase:
                        self.fsm.dispatch(Event.FAULT_RAISED)
                    else:
                        self.fsm.dispatch(Event.DIVERGED)
            elif state is CouplingState.POLARIZATION_OPT:
                window = self.gather_window()
                reference = float(np.median(window))
                verdict = stability_check(window, reference, self.cfg.lock_threshold_db)
                if verdict.stable:
                    self.lock_reference_w = reference
                    self.fsm.dispatch(Event.STABILITY_OK)
                else:
                    retries += 1
                    if retries > self.cfg.retries_per_phase:
                        self.fsm.dispatch(Event.FAULT_RAISED)
        return self.fsm.state is CouplingState.LOCKED
