"""Chiplet layout: machine-readable device/coupler geometry."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ParseError, ValidationError

FACET_TOL_UM = 1.0


@dataclass(frozen=True)
class DeviceSite:
    device_id: str
    input_coupler: tuple[float, float]
    output_coupler: tuple[float, float]
    notes: str = ""


@dataclass
class ChipLayout:
    chiplet_id: str
    extent_um: tuple[float, float]  # (width, height), centered at the origin
    left_facet_x: float
    right_facet_x: float
    devices: list[DeviceSite] = field(default_factory=list)

    def validate(self) -> None:
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate device ids: {dupes}")
        w, h = self.extent_um
        for d in self.devices:
            ix, iy = d.input_coupler
            ox, oy = d.output_coupler
            if abs(ix - self.left_facet_x) > FACET_TOL_UM:
                raise ValidationError(
                    f"{d.device_id}: input coupler x={ix} not on left facet {self.left_facet_x}"
                )
            if abs(ox - self.right_facet_x) > FACET_TOL_UM:
                raise ValidationError(
                    f"{d.device_id}: output coupler x={ox} not on right facet {self.right_facet_x}"
                )
            for (x, y) in (d.input_coupler, d.output_coupler):
                if abs(y) > h / 2 or abs(x) > w / 2 + FACET_TOL_UM:
                    raise ValidationError(f"{d.device_id}: coupler ({x}, {y}) outside extent")

    def device(self, device_id: str) -> DeviceSite:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise KeyError(device_id)

    def ordered_devices(self) -> list[DeviceSite]:
        """Column-major iteration order: down the facet column by y."""
        return sorted(self.devices, key=lambda d: (d.input_coupler[0], d.input_coupler[1]))


def load_layout(path: str | Path) -> ChipLayout:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"layout file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ParseError(f"layout parse failed: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("layout root must be a mapping")

    def need(key: str, where: dict, ctx: str):
        if key not in where:
            raise ParseError(f"missing field {key!r} in {ctx}")
        return where[key]

    extent = need("extent_um", doc, "layout")
    facets = need("facets", doc, "layout")
    devices = []
    for i, entry in enumerate(need("devices", doc, "layout")):
        ctx = f"devices[{i}]"
        devices.append(
            DeviceSite(
                device_id=str(need("device_id", entry, ctx)),
                input_coupler=tuple(need("input_coupler", entry, ctx)),
                output_coupler=tuple(need("output_coupler", entry, ctx)),
                notes=str(entry.get("notes", "")),
            )
        )
    layout = ChipLayout(
        chiplet_id=str(need("chiplet_id", doc, "layout")),
        extent_um=(float(need("width", extent, "extent_um")), float(need("height", extent, "extent_um"))),
        left_facet_x=float(need("left_x", facets, "facets")),
        right_facet_x=float(need("right_x", facets, "facets")),
        devices=devices,
    )
    layout.validate()
    return layout


def default_layout(n_devices: int = 8) -> ChipLayout:
    """The shipped two-column fixture: n devices at 50 um pitch."""
    pitch = 50.0
    y0 = -pitch * (n_devices - 1) / 2
    devices = [
        DeviceSite(
            device_id=f"D{k + 1}",
            input_coupler=(-300.0, y0 + k * pitch),
            output_coupler=(300.0, y0 + k * pitch),
        )
        for k in range(n_devices)
    ]
    layout = ChipLayout(
        chiplet_id="FIXTURE-8DEV",
        extent_um=(600.0, 500.0),
        left_facet_x=-300.0,
        right_facet_x=300.0,
        devices=devices,
    )
    layout.validate()
    return layout


def save_layout(layout: ChipLayout, path: str | Path) -> None:
    doc = {
        "chiplet_id": layout.chiplet_id,
        "extent_um": {"width": layout.extent_um[0], "height": layout.extent_um[1]},
        "facets": {"left_x": layout.left_facet_x, "right_x": layout.right_facet_x},
        "devices": [
            {
                "device_id": d.device_id,
                "input_coupler": list(d.input_coupler),
                "output_coupler": list(d.output_coupler),
                "notes": d.notes,
            }
            for d in layout.devices
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
