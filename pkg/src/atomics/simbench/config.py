"""Physics-model parameters for the simulated bench."""

from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass
class SimConfig:
    """All knobs of the simulated bench.

    p_in_w          laser power at the input fiber
    eta0            peak coupling efficiency per facet; enters squared
                    because input and output facets both couple
    w0_um           effective lateral capture waist
    z_r_um          effective Rayleigh range (axial scale)
    eps_pol         polarization extinction floor
    theta_opt_deg   paddle angle of maximum transmission
    p_dark_w        detector dark floor
    sigma_rel       relative multiplicative power noise
    drift_theta     OU mean-reversion rate (1/s); stationary per-component
                    std is drift_sigma / sqrt(2 * drift_theta)
    drift_sigma     OU diffusion (um per sqrt-second); default tuned so an
                    uncorrected bench loses > 3 dB within ~2 simulated days
    backlash_um     deadband absorbed on piezo direction reversal
    step_noise_rel  relative noise on each commanded piezo step
    tilt_coupling_um_per_deg   lateral fiber deflection per goniometer degree
    render_noise    additive per-pixel Gaussian std, in 0..1 grayscale units
    seed            master seed; all randomness derives from it
    """

    p_in_w: float = 1e-3
    eta0: float = 0.5
    w0_um: float = 2.5
    z_r_um: float = 20.0
    eps_pol: float = 0.05
    theta_opt_deg: float = 37.0
    p_dark_w: float = 1e-9
    sigma_rel: float = 0.01
    drift_theta: float = 5e-5
    drift_sigma: float = 5e-3
    backlash_um: float = 0.2
    step_noise_rel: float = 0.02
    tilt_coupling_um_per_deg: float = 0.1
    render_noise: float = 2.0 / 255.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must be in (0, 1]")
        if not 0 <= self.eps_pol < 1:
            raise ValueError("eps_pol must be in [0, 1)")
        for name in ("p_in_w", "w0_um", "z_r_um", "p_dark_w", "drift_theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("sigma_rel", "drift_sigma", "backlash_um", "step_noise_rel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        return cls(**data)
