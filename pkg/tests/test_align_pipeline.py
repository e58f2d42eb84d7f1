"""Controller integration tests on the simulated bench."""

import math

import numpy as np
import pytest

from atomics.align import CouplingState, Event
from atomics.config import SystemConfig
from atomics.engine import Engine
from atomics.errors import Diverged, FlatResponse, KeepoutViolation, LimitViolation
from atomics.hal.axes import Axis, AxisId, Tower
from atomics.simbench.config import SimConfig


def make_engine(tmp_path, seed=0, noiseless=False, calibrate=True, drift=True,
                layout=None, **sim_overrides):
    sim_kwargs = dict(seed=seed)
    if noiseless:
        sim_kwargs.update(sigma_rel=0.0, step_noise_rel=0.0, backlash_um=0.0, render_noise=0.0)
    sim_kwargs.update(sim_overrides)
    cfg = SystemConfig(sim=SimConfig(**sim_kwargs))
    eng = Engine(cfg, layout=layout, run_dir=tmp_path / "run")
    if not drift:
        eng.world.drift_enabled = False
    if calibrate:
        eng.auto_calibrate()
    return eng


def to_focus(eng, side="both", lateral=(0.0, 0.0), axial=0.0):
    """Place towers at their optimum plus an offset (test setup hook)."""
    for s in ("left", "right") if side == "both" else (side,):
        t = eng.world.towers[s]
        in1, out1 = eng.world.scene.couplers_for("D1")
        tx, ty = eng.world.scene.tip_target(in1 if s == "left" else out1)
        eng.world.place_tower(s, tx + lateral[0], ty + lateral[1], axial)
        for ax, val in ((Axis.X, tx + lateral[0]), (Axis.Y, ty + lateral[1]), (Axis.Z, axial)):
            st = eng.bench.axes[AxisId(Tower.LEFT_FIBER if s == "left" else Tower.RIGHT_FIBER, ax)]
            st.commanded_position = val
            st.estimated_position = val


def test_auto_calibration_recovers_scale(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    record = eng.auto_calibrate()
    ppm = eng.world.scene.pixels_per_um
    assert np.allclose(record.map2.m, [[ppm, 0], [0, ppm]], atol=0.02)
    assert record.map2.rms_residual_px <= 0.5
    assert eng.fsm.state is CouplingState.IDLE


def test_line_scan_matches_model_exactly(tmp_path):
    """Noiseless scan powers equal direct model evaluation at the visited
    positions (oracle: closed-form two-facet model)."""
    from atomics.simbench.model import coupled_power_two_facet

    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    axis = AxisId(Tower.LEFT_FIBER, Axis.X)
    center = eng.bench.commanded(axis)
    scan = eng.controller.line_scan(axis, center, 3.75, 7)
    for pos, power in zip(scan.positions, scan.powers):
        expected = coupled_power_two_facet(
            (pos - center, 0.0, 0.0), (0.0, 0.0, 0.0),
            eng.world.cfg.theta_opt_deg, eng.world.cfg,
        )
        assert power == pytest.approx(expected, rel=1e-9)
    # symmetric around the true peak
    assert scan.powers[0] == pytest.approx(scan.powers[-1], rel=1e-9)
    assert scan.fit is not None
    assert scan.fit.vertex == pytest.approx(center, abs=1e-9)


def test_line_scan_limit_check_before_motion(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    axis = AxisId(Tower.LEFT_FIBER, Axis.X)
    before = eng.bench.commanded(axis)
    with pytest.raises(LimitViolation):
        eng.controller.line_scan(axis, 415.0, 10.0, 7)
    assert eng.bench.commanded(axis) == before


def test_safe_approach_respects_keepout(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    eng.world.laser_on = False  # no first light: approach runs to the plane
    plane = eng.config.align.contact_plane_um
    final = eng.controller.safe_approach_z("left", plane)
    assert final <= plane - eng.config.align.z_keepout_um
    assert final >= plane - eng.config.align.z_keepout_um - 0.5


def test_safe_approach_halts_on_first_light(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng, lateral=(1.0, 0.0), axial=-30.0)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    final = eng.controller.safe_approach_z("left", eng.config.align.contact_plane_um)
    # light appears immediately at this misalignment, so barely any travel
    assert final < -20.0


def test_safe_approach_keepout_violation(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    with pytest.raises(KeepoutViolation):
        eng.controller.safe_approach_z("left", 70.0)


def test_spiral_immediate_when_above_threshold(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    samples_before = eng.controller.power_samples
    found = eng.controller.spiral_search("left")
    ax = AxisId(Tower.LEFT_FIBER, Axis.X)
    assert found == (eng.bench.commanded(ax), eng.bench.commanded(AxisId(Tower.LEFT_FIBER, Axis.Y)))
    assert eng.controller.power_samples - samples_before == 1


def test_spiral_finds_offset_peak(tmp_path):
    eng = make_engine(tmp_path, seed=5, calibrate=False, drift=False)
    to_focus(eng)
    # secretly displace the world (stage truth) so only the spiral can find it
    eng.world.displace_tower("left", 9.0, -7.0, 0.0)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    found = eng.controller.spiral_search("left")
    assert found is not None
    assert eng.controller.read_power() > eng.config.align.first_light_threshold_w


def test_spiral_not_found_beyond_radius(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng)
    eng.world.displace_tower("left", 120.0, 0.0, 0.0)  # far outside the budget
    found = eng.controller.spiral_search("left")
    assert found is None


def test_fine_align_noiseless_reaches_true_peak(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng, lateral=(2.0, -1.5), axial=-5.0)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    result = eng.controller.fine_align()
    assert result.converged
    err_l = eng.world.true_lateral_error("left", "D1")
    err_r = eng.world.true_lateral_error("right", "D1")
    assert max(err_l, err_r) <= 1e-6
    assert result.power_w == pytest.approx(eng.world.optimum_power(), rel=1e-6)


def test_fine_align_idempotent_at_peak(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng)
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    ax = AxisId(Tower.LEFT_FIBER, Axis.X)
    before = eng.bench.commanded(ax)
    result = eng.controller.fine_align()
    assert result.converged and result.iterations == 1
    assert abs(eng.bench.commanded(ax) - before) < eng.config.align.convergence_tol_um


def test_fine_align_diverges_when_laser_unplugged(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng, lateral=(1.0, 0.0))
    eng.bench.set_polarization((eng.world.cfg.theta_opt_deg, 0, 0))
    reads = {"n": 0}

    def kill_laser_mid_run(sample):
        reads["n"] += 1
        if reads["n"] == 30:
            eng.world.laser_on = False

    eng.bench.add_power_listener(kill_laser_mid_run)
    with pytest.raises(Diverged):
        eng.controller.fine_align()


def test_polarization_recovers_optimum(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False)
    to_focus(eng)
    eng.bench.set_polarization((120.0, 0.0, 0.0))
    theta = eng.controller.optimize_polarization()
    assert abs((theta - eng.world.cfg.theta_opt_deg + 90) % 180 - 90) <= 0.5
    p = eng.controller.read_power()
    assert p >= 0.99 * eng.world.optimum_power()


def test_polarization_flat_response(tmp_path):
    eng = make_engine(tmp_path, noiseless=True, calibrate=False, drift=False,
                      eps_pol=0.999999)
    to_focus(eng)
    with pytest.raises(FlatResponse):
        eng.controller.optimize_polarization()
    assert eng.bench.paddles[0] == 0.0  # original angle kept


def test_coarse_align_from_40um_offset(tmp_path):
    eng = make_engine(tmp_path, seed=11)
    eng.world.displace_tower("left", -28.0, 28.0, 0.0)  # ~40 um total
    offset = eng.controller.coarse_align("D1")
    assert offset <= eng.config.align.coarse_target_um
    assert eng.world.true_lateral_error("left", "D1") <= 3.0


def displace_for_coupling(eng, side, lateral, axial):
    """Acceptance-style initial condition: an unknown lateral misalignment
    (secret truth offset, vision must find it) plus a known axial park
    offset (commanded: the fiber is simply short of focus)."""
    eng.world.displace_tower(side, lateral[0], lateral[1], 0.0)
    tower = Tower.LEFT_FIBER if side == "left" else Tower.RIGHT_FIBER
    eng.bench.move_absolute(AxisId(tower, Axis.Z), axial)


def test_full_couple_pipeline(tmp_path):
    eng = make_engine(tmp_path, seed=3)
    displace_for_coupling(eng, "left", (9.0, -11.0), -8.0)
    displace_for_coupling(eng, "right", (-6.0, 13.0), -12.0)
    outcome = eng.couple("D1")
    assert outcome.locked, outcome.error
    assert eng.fsm.state is CouplingState.LOCKED
    assert eng.world.true_lateral_error("left", "D1") <= 0.2
    assert eng.world.true_lateral_error("right", "D1") <= 0.2
    db_off = 10 * math.log10(eng.world.optimum_power() / outcome.power_w)
    assert abs(db_off) <= 0.1
    assert outcome.samples_used <= 400


def test_abort_retracts_and_routes(tmp_path):
    from atomics.hal.signals import SwitchRoute

    eng = make_engine(tmp_path, seed=3)
    outcome = eng.couple("D1")
    assert outcome.locked
    z_before = eng.bench.commanded(AxisId(Tower.LEFT_FIBER, Axis.Z))
    eng.abort()
    assert eng.fsm.state is CouplingState.IDLE
    assert eng.bench.route is SwitchRoute.POWER_METER
    assert eng.bench.commanded(AxisId(Tower.LEFT_FIBER, Axis.Z)) == pytest.approx(
        z_before - 20.0
    )
