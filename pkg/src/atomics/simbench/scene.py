"""Scene geometry for the synthetic microscope.

World coordinates are micrometers in the lateral plane the camera images;
pixel coordinates map through pixels_per_um with the frame center anchored
at the camera encoder position. The chiplet is a bright rectangle whose
edge couplers sit on the left and right facets in two vertical columns;
each fiber tip parks a standoff outside its facet.

The tower z axis is the approach axis (invisible to the camera): z = 0 is
the coupling optimum and contact_plane_z is where the fiber would crash.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CouplerSite:
    device_id: str
    port: str  # "in" (left facet) or "out" (right facet)
    x: float
    y: float


@dataclass
class Scene:
    chip_center: tuple[float, float] = (0.0, 0.0)
    chip_size: tuple[float, float] = (600.0, 500.0)
    couplers: list[CouplerSite] = field(default_factory=list)
    fiber_tips: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    pixels_per_um: float = 1.28  # a 200 um feature spans exactly 256 px
    frame_width: int = 1024
    frame_height: int = 768
    standoff_um: float = 12.0  # lens working distance; keeps the facet out of the tip glyph
    contact_plane_z: float = 8.0
    scene_margin_um: float = 700.0

    @property
    def left_facet_x(self) -> float:
        return self.chip_center[0] - self.chip_size[0] / 2

    @property
    def right_facet_x(self) -> float:
        return self.chip_center[0] + self.chip_size[0] / 2

    def facet_x(self, side: str) -> float:
        return self.left_facet_x if side == "left" else self.right_facet_x

    def tip_target(self, coupler: CouplerSite) -> tuple[float, float]:
        """Optimal lateral tip position for a coupler: standoff outside the facet."""
        sign = -1.0 if coupler.port == "in" else 1.0
        return (coupler.x + sign * self.standoff_um, coupler.y)

    def camera_in_bounds(self, cam_x: float, cam_y: float) -> bool:
        cx, cy = self.chip_center
        w, h = self.chip_size
        m = self.scene_margin_um
        return (
            cx - w / 2 - m <= cam_x <= cx + w / 2 + m
            and cy - h / 2 - m <= cam_y <= cy + h / 2 + m
        )

    def couplers_for(self, device_id: str) -> tuple[CouplerSite, CouplerSite]:
        sites = {c.port: c for c in self.couplers if c.device_id == device_id}
        return sites["in"], sites["out"]


def default_scene(n_devices: int = 8) -> Scene:
    """The shipped fixture: n devices in two facet columns, 50 um pitch."""
    scene = Scene()
    pitch = 50.0
    y0 = -pitch * (n_devices - 1) / 2
    for k in range(n_devices):
        y = y0 + k * pitch
        dev = f"D{k + 1}"
        scene.couplers.append(CouplerSite(dev, "in", scene.left_facet_x, y))
        scene.couplers.append(CouplerSite(dev, "out", scene.right_facet_x, y))
    return scene
