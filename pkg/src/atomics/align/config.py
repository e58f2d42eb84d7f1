"""Alignment controller tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict


@dataclass
class AlignConfig:
    """Search and convergence knobs.

    first_light_threshold_w   absolute power marking entry into the capture
                              basin (default ten times the dark floor)
    spiral_pitch_um           lattice pitch of the square capture spiral;
                              must not exceed the capture width or the
                              spiral can step over the peak
    scan_half_range_um        initial lateral line-scan half range (halves
                              per fine-align round)
    z_scan_half_range_um      initial axial half range; axial curvature is
                              Rayleigh-scaled, so z scans run coarser
    realign_half_range_um     trimmed lateral range for drift realignment:
                              alarms fire at ~0.1 dB deficits, so wide scans
                              would only burn the lock's power budget
    convergence_tol_um        per-axis correction below which a round counts
                              as converged
    lock_threshold_db         dB below the locked reference that voids
                              stability
    tip_standoff_um           lateral gap between a parked lens and the
                              facet (bench geometry, used by coarse vision)
    """

    first_light_threshold_w: float = 1e-8
    dark_floor_w: float = 1e-9
    spiral_pitch_um: float = 2.5
    spiral_max_radius_um: float = 25.0
    scan_points: int = 7
    scan_half_range_um: float = 3.75
    z_scan_half_range_um: float = 10.0
    realign_half_range_um: float = 0.8
    realign_z_half_range_um: float = 2.0
    convergence_tol_um: float = 0.05
    max_iterations: int = 10
    z_keepout_um: float = 3.0
    lock_threshold_db: float = 1.0
    coarse_target_um: float = 3.0
    coarse_deadband_um: float = 1.0
    tip_standoff_um: float = 12.0
    contact_plane_um: float = 8.0
    retries_per_phase: int = 2
    stability_window: int = 20
    polarization_steps: int = 12

    def __post_init__(self):
        for name in (
            "first_light_threshold_w",
            "spiral_pitch_um",
            "spiral_max_radius_um",
            "scan_half_range_um",
            "z_scan_half_range_um",
            "realign_half_range_um",
            "convergence_tol_um",
            "z_keepout_um",
            "lock_threshold_db",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.scan_points < 3:
            raise ValueError("scan_points must be >= 3")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def capture_width_um(self, peak_w: float, w0_um: float) -> float:
        """Lateral radius at which single-facet power crosses the first-light
        threshold; the spiral pitch must stay below it for guaranteed capture."""
        ratio = peak_w / max(self.first_light_threshold_w - self.dark_floor_w, 1e-30)
        return w0_um * math.sqrt(max(math.log(ratio), 0.0))

    def validate_capture(self, peak_w: float, w0_um: float) -> None:
        width = self.capture_width_um(peak_w, w0_um)
        if self.spiral_pitch_um > width:
            raise ValueError(
                f"spiral pitch {self.spiral_pitch_um} um exceeds capture width "
                f"{width:.2f} um; first light is not guaranteed"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AlignConfig":
        return cls(**data)
