"""Deterministic, seedable physics bench implementing every driver role:
Gaussian-overlap coupling, polarization transmission, OU drift, piezo
imperfection and a synthetic microscope renderer."""

from .config import SimConfig
from .clock import SimClock
from .model import DriftState, apply_stage_step, coupled_power, step_drift, AxisMotion
from .scene import Scene, default_scene
from .render import render_frame
from .world import SimWorld, register_sim_drivers

__all__ = [
    "AxisMotion",
    "DriftState",
    "Scene",
    "SimClock",
    "SimConfig",
    "SimWorld",
    "apply_stage_step",
    "coupled_power",
    "default_scene",
    "register_sim_drivers",
    "render_frame",
    "step_drift",
]
