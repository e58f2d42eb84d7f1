"""Unified engine configuration: driver bindings, axis topology overrides,
simulation, alignment and monitor parameters, loadable from one YAML file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .align.config import AlignConfig
from .errors import ConfigError
from .hal.axes import AxisId, Axis, GONIOMETER_SPAN_DEG
from .hal.drivers import InstrumentRole
from .simbench.config import SimConfig

DEFAULT_DRIVER = "simbench"


@dataclass
class MonitorConfig:
    ewma_lambda: float = 0.05
    cusum_k_sigma: float = 0.5
    cusum_h_sigma: float = 14.0
    stability_rsd: float = 0.02
    stability_window: int = 20
    lock_cadence_hz: float = 10.0
    telemetry_decimation: int = 10
    sigma_estimate_samples: int = 100

    def __post_init__(self):
        if not 0 < self.ewma_lambda <= 1:
            raise ConfigError("ewma_lambda must be in (0, 1]")
        if self.cusum_k_sigma < 0 or self.cusum_h_sigma <= 0:
            raise ConfigError("cusum parameters must be positive")
        if self.lock_cadence_hz <= 0:
            raise ConfigError("lock_cadence_hz must be positive")


@dataclass
class SystemConfig:
    drivers: dict[str, str] = field(
        default_factory=lambda: {role.value: DEFAULT_DRIVER for role in InstrumentRole}
    )
    driver_params: dict[str, dict] = field(default_factory=dict)
    axis_limits: dict[str, tuple[float, float]] = field(default_factory=dict)
    sim: SimConfig = field(default_factory=SimConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    n_devices: int = 8
    run_root: str = "runs"
    pressure_label: str = "ambient"
    time_accel: float = 1.0
    template_dir: str | None = None

    def validate(self) -> None:
        for role in InstrumentRole:
            if role.value not in self.drivers:
                raise ConfigError(f"driver role {role.value} is unbound in config")
        for name, limits in self.axis_limits.items():
            try:
                axis = AxisId.parse(name)
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"unknown axis {name!r} in topology") from exc
            lo, hi = limits
            if not lo < hi:
                raise ConfigError(f"axis {name}: min must be < max, got {limits}")
            if axis.axis is Axis.THETA and abs((hi - lo) - GONIOMETER_SPAN_DEG) > 1e-9:
                raise ConfigError(
                    f"goniometer limits must span exactly {GONIOMETER_SPAN_DEG} degrees"
                )

    def to_dict(self) -> dict:
        doc = {
            "drivers": dict(self.drivers),
            "driver_params": dict(self.driver_params),
            "axis_limits": {k: list(v) for k, v in self.axis_limits.items()},
            "sim": self.sim.to_dict(),
            "align": self.align.to_dict(),
            "monitor": asdict(self.monitor),
            "n_devices": self.n_devices,
            "run_root": self.run_root,
            "pressure_label": self.pressure_label,
            "time_accel": self.time_accel,
            "template_dir": self.template_dir,
        }
        return doc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def load_config(path: str | Path) -> SystemConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse failed: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    try:
        cfg = SystemConfig(
            drivers=doc.get("drivers", SystemConfig().drivers),
            driver_params=doc.get("driver_params", {}),
            axis_limits={k: tuple(v) for k, v in doc.get("axis_limits", {}).items()},
            sim=SimConfig.from_dict(doc.get("sim", {})),
            align=AlignConfig.from_dict(doc.get("align", {})),
            monitor=MonitorConfig(**doc.get("monitor", {})),
            n_devices=int(doc.get("n_devices", 8)),
            run_root=str(doc.get("run_root", "runs")),
            pressure_label=str(doc.get("pressure_label", "ambient")),
            time_accel=float(doc.get("time_accel", 1.0)),
            template_dir=doc.get("template_dir"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    cfg.validate()
    return cfg
