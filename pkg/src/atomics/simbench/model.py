"""The coupling, drift and actuator models.

Coupled power for a facet offset (dx, dy, dz) from the optimum, paddle
angle p and config c:

    P = P_dark + P_in * eta0^2 * T_pol * A(dz) * exp(-(dx^2+dy^2)/w_eff(dz)^2)

    A(dz)     = 1 / (1 + (dz/z_R)^2)
    w_eff(dz) = w0 * sqrt(1 + (dz/z_R)^2)
    T_pol     = eps + (1 - eps) * cos^2(p - theta_opt)

so ln(P - P_dark) is an exact quadratic in dx at fixed dy, dz, paddle --
the property the fine-alignment fitter exploits. Measurement noise
multiplies (P - P_dark) by (1 + sigma_rel * g) with g standard normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import SimConfig


def _facet_factor(dx: float, dy: float, dz: float, cfg: SimConfig) -> float:
    axial = 1.0 + (dz / cfg.z_r_um) ** 2
    w_eff_sq = cfg.w0_um**2 * axial
    return (1.0 / axial) * math.exp(-(dx * dx + dy * dy) / w_eff_sq)


def polarization_factor(paddle_deg: float, cfg: SimConfig) -> float:
    c = math.cos(math.radians(paddle_deg - cfg.theta_opt_deg))
    return cfg.eps_pol + (1.0 - cfg.eps_pol) * c * c


def coupled_power(
    fiber_offset: tuple[float, float, float],
    paddle_deg: float,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """Power in watts for one facet offset, the other facet assumed perfect.

    Total function: never raises, never returns a negative value.
    Deterministic given the rng state (pass None for the noiseless model).
    """
    dx, dy, dz = fiber_offset
    signal = (
        cfg.p_in_w * cfg.eta0**2 * polarization_factor(paddle_deg, cfg) * _facet_factor(dx, dy, dz, cfg)
    )
    if rng is not None and cfg.sigma_rel > 0:
        signal *= 1.0 + cfg.sigma_rel * rng.standard_normal()
    return cfg.p_dark_w + max(signal, 0.0)


def coupled_power_two_facet(
    offset_in: tuple[float, float, float],
    offset_out: tuple[float, float, float],
    paddle_deg: float,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
    laser_on: bool = True,
) -> float:
    """Fiber-chip-fiber power: both facet factors multiply the shared signal."""
    if not laser_on:
        return cfg.p_dark_w
    signal = (
        cfg.p_in_w
        * cfg.eta0**2
        * polarization_factor(paddle_deg, cfg)
        * _facet_factor(*offset_in, cfg)
        * _facet_factor(*offset_out, cfg)
    )
    if rng is not None and cfg.sigma_rel > 0:
        signal *= 1.0 + cfg.sigma_rel * rng.standard_normal()
    return cfg.p_dark_w + max(signal, 0.0)


@dataclass(frozen=True)
class DriftState:
    """Lateral mechanical drift of one fiber tower, Ornstein-Uhlenbeck per
    component. Stationary std of each component is drift_sigma/sqrt(2*theta)."""

    dx: float = 0.0
    dy: float = 0.0
    last_update: float = 0.0


def step_drift(
    state: DriftState, dt: float, cfg: SimConfig, rng: np.random.Generator
) -> DriftState:
    """Exact OU discretization: valid for any dt > 0."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    theta = cfg.drift_theta
    decay = math.exp(-theta * dt)
    diff = cfg.drift_sigma * math.sqrt((1.0 - math.exp(-2.0 * theta * dt)) / (2.0 * theta))
    gx, gy = rng.standard_normal(2)
    return DriftState(
        dx=state.dx * decay + diff * gx,
        dy=state.dy * decay + diff * gy,
        last_update=state.last_update + dt,
    )


@dataclass
class AxisMotion:
    """Open-loop piezo realism for one axis: per-step noise plus a backlash
    deadband absorbed when the direction of travel reverses."""

    true_position: float = 0.0
    last_direction: int = 0
    pending_deadband: float = 0.0


def apply_stage_step(
    motion: AxisMotion,
    requested_delta: float,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """Apply one commanded relative move; returns the actual displacement and
    mutates motion.true_position."""
    if requested_delta == 0.0:
        return 0.0
    direction = 1 if requested_delta > 0 else -1
    if motion.last_direction != 0 and direction != motion.last_direction:
        motion.pending_deadband = cfg.backlash_um
    motion.last_direction = direction

    actual = requested_delta
    if rng is not None and cfg.step_noise_rel > 0:
        actual *= 1.0 + cfg.step_noise_rel * rng.standard_normal()
    # noise cannot flip the commanded direction; clamp to zero displacement
    if actual * direction < 0:
        actual = 0.0

    if motion.pending_deadband > 0.0:
        absorbed = min(abs(actual), motion.pending_deadband)
        motion.pending_deadband -= absorbed
        actual -= direction * absorbed

    motion.true_position += actual
    return actual
