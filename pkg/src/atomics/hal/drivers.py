"""Instrument driver interfaces and the role registry.

Concrete drivers (the simulated bench today, vendor adapters for the
Attocube piezo controller / ESP-300 microscope motors / Arduino-driven
optical switch as intended extension points) implement these interfaces
and are bound to roles by name at configuration time. The controller can
only start once all eight roles are bound, and rebinding is refused while
a campaign is active.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable

import numpy as np

from ..errors import CampaignActive, UnknownDriver
from .axes import AxisId
from .signals import SwitchRoute


class InstrumentRole(Enum):
    STAGE = "stage"
    POWER_METER = "power_meter"
    SWITCH = "switch"
    POLARIZATION = "polarization"
    CAMERA = "camera"
    TEMP_CONTROLLER = "temp_controller"
    DAQ = "daq"
    GONIOMETER = "goniometer"


class StageDriver(ABC):
    """Open-loop positioner bank covering every linear axis."""

    @abstractmethod
    def step(self, axis: AxisId, requested_delta: float) -> None:
        """Command a relative move; completion is synchronous or polled."""

    @abstractmethod
    def settled(self, axis: AxisId) -> bool:
        ...


class PowerMeterDriver(ABC):
    @abstractmethod
    def read_watts(self) -> float:
        ...


class SwitchDriver(ABC):
    @abstractmethod
    def set_route(self, route: SwitchRoute) -> None:
        ...

    @abstractmethod
    def route(self) -> SwitchRoute:
        ...


class PolarizationDriver(ABC):
    @abstractmethod
    def set_paddles(self, angles_deg: tuple[float, float, float]) -> None:
        ...


class CameraDriver(ABC):
    @abstractmethod
    def grab(self) -> tuple[np.ndarray, tuple[float, float, float]]:
        """Return (uint8 image, microscope encoder (x, y, z) at capture)."""


class TempControllerDriver(ABC):
    @abstractmethod
    def set_setpoint(self, kelvin: float) -> None:
        ...

    @abstractmethod
    def setpoint(self) -> float:
        ...


class DaqDriver(ABC):
    @abstractmethod
    def acquire(self, kind: str, duration_s: float, params: dict) -> np.ndarray:
        ...


class GoniometerDriver(ABC):
    @abstractmethod
    def set_angle(self, angle_deg: float) -> None:
        ...


_ROLE_INTERFACES = {
    InstrumentRole.STAGE: StageDriver,
    InstrumentRole.POWER_METER: PowerMeterDriver,
    InstrumentRole.SWITCH: SwitchDriver,
    InstrumentRole.POLARIZATION: PolarizationDriver,
    InstrumentRole.CAMERA: CameraDriver,
    InstrumentRole.TEMP_CONTROLLER: TempControllerDriver,
    InstrumentRole.DAQ: DaqDriver,
    InstrumentRole.GONIOMETER: GoniometerDriver,
}

# name -> role -> factory(params) -> driver instance
_FACTORIES: dict[str, dict[InstrumentRole, Callable]] = {}


def register_driver_factory(name: str, role: InstrumentRole, factory: Callable) -> None:
    _FACTORIES.setdefault(name, {})[role] = factory


def known_driver_names() -> tuple[str, ...]:
    return tuple(sorted(_FACTORIES))


class DriverRegistry:
    """role -> (driver name, instance). Complete when all eight roles bound."""

    def __init__(self):
        self._bindings: dict[InstrumentRole, tuple[str, object]] = {}
        self.campaign_active = False

    def bind(self, role: InstrumentRole, name: str, **params) -> None:
        if self.campaign_active:
            raise CampaignActive(f"cannot rebind {role.value} while a campaign is active")
        try:
            factory = _FACTORIES[name][role]
        except KeyError:
            raise UnknownDriver(f"no driver named {name!r} for role {role.value}") from None
        instance = factory(**params)
        expected = _ROLE_INTERFACES[role]
        if not isinstance(instance, expected):
            raise UnknownDriver(
                f"driver {name!r} for role {role.value} is not a {expected.__name__}"
            )
        self._bindings[role] = (name, instance)

    def get(self, role: InstrumentRole):
        name_instance = self._bindings.get(role)
        if name_instance is None:
            raise UnknownDriver(f"role {role.value} is unbound")
        return name_instance[1]

    def bound_name(self, role: InstrumentRole) -> str | None:
        binding = self._bindings.get(role)
        return binding[0] if binding else None

    def complete(self) -> bool:
        return all(role in self._bindings for role in InstrumentRole)

    def missing_roles(self) -> list[InstrumentRole]:
        return [role for role in InstrumentRole if role not in self._bindings]
