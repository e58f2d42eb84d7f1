"""Synthetic microscope frames.

Intensity-flat glyphs on a dark background with additive per-pixel Gaussian
noise; geometry is exact to +-0.5 px (glyph anchors round to the nearest
pixel). Gray levels are chosen so oracle code can isolate glyph classes by
thresholding: background 20, chiplet body 90, waveguides 110, fiber body
140, lenses and tapers 230.
"""

from __future__ import annotations

import numpy as np

from ..errors import CameraOutOfScene
from ..hal.signals import Frame
from .scene import Scene

BG_LEVEL = 20
CHIP_LEVEL = 90
GUIDE_LEVEL = 110
FIBER_BODY_LEVEL = 140
BRIGHT_LEVEL = 230

LENS_RADIUS_PX = 5
FIBER_NECK_LEN_PX = 27
FIBER_NECK_THICK_PX = 3
FIBER_BODY_THICK_PX = 9
TAPER_LEN_PX = 24
TAPER_HALFH_PX = 9


def world_to_px(
    scene: Scene, camera_xy: tuple[float, float], x: float, y: float
) -> tuple[float, float]:
    ppm = scene.pixels_per_um
    cx = scene.frame_width / 2 + (x - camera_xy[0]) * ppm
    cy = scene.frame_height / 2 + (y - camera_xy[1]) * ppm
    return cx, cy


def px_to_world(
    scene: Scene, camera_xy: tuple[float, float], px: float, py: float
) -> tuple[float, float]:
    ppm = scene.pixels_per_um
    x = camera_xy[0] + (px - scene.frame_width / 2) / ppm
    y = camera_xy[1] + (py - scene.frame_height / 2) / ppm
    return x, y


def _fill_rect(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, level: int) -> None:
    h, w = img.shape
    x0, x1 = max(x0, 0), min(x1, w)
    y0, y1 = max(y0, 0), min(y1, h)
    if x0 < x1 and y0 < y1:
        img[y0:y1, x0:x1] = level


def _fill_disk(img: np.ndarray, cx: int, cy: int, r: int, level: int) -> None:
    h, w = img.shape
    x0, x1 = max(cx - r, 0), min(cx + r + 1, w)
    y0, y1 = max(cy - r, 0), min(cy + r + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    img[y0:y1, x0:x1][mask] = level


def draw_coupler(img: np.ndarray, ax: int, ay: int, facing: str) -> None:
    """Taper glyph anchored at the facet-edge midpoint, widening into the chip.

    facing "left" means the taper mouth faces left (an input coupler on the
    left facet); the triangle then extends rightward into the chip body.
    """
    h, w = img.shape
    inward = 1 if facing == "left" else -1
    for i in range(TAPER_LEN_PX):
        half = 1 + (TAPER_HALFH_PX - 1) * i // (TAPER_LEN_PX - 1)
        x = ax + inward * i
        if 0 <= x < w:
            y0, y1 = max(ay - half, 0), min(ay + half + 1, h)
            img[y0:y1, x] = BRIGHT_LEVEL


def draw_fiber_tip(img: np.ndarray, ax: int, ay: int, side: str) -> None:
    """Lens-ended fiber glyph anchored at the lens center: a wide cladding
    body tapering through a thin neck into the lens ball, trailing away
    from the chip. The profile is what makes a tip unmistakable for a
    coupler taper under correlation."""
    outward = -1 if side == "left" else 1
    neck_end = ax + outward * FIBER_NECK_LEN_PX
    # the cladding body always runs out of the field of view: a blunt body
    # end would read as another lens ball under correlation
    body_end = -10_000 if side == "left" else 10_000
    xa, xb = sorted((ax, neck_end))
    t = FIBER_NECK_THICK_PX // 2
    _fill_rect(img, xa, ay - t, xb + 1, ay + t + 1, FIBER_BODY_LEVEL)
    xa, xb = sorted((neck_end, body_end))
    t = FIBER_BODY_THICK_PX // 2
    _fill_rect(img, xa, ay - t, xb + 1, ay + t + 1, FIBER_BODY_LEVEL)
    _fill_disk(img, ax, ay, LENS_RADIUS_PX, BRIGHT_LEVEL)


FIDUCIAL_ARM_PX = 20
FIDUCIAL_THICK_PX = 3


def draw_corner_fiducial(img: np.ndarray, ax: int, ay: int) -> None:
    """Bright L-mark with its vertex at the chip's top-left corner, arms
    running inward along the two edges. Gives the chip-reference class a
    unique high-contrast anchor."""
    _fill_rect(img, ax, ay, ax + FIDUCIAL_ARM_PX, ay + FIDUCIAL_THICK_PX, BRIGHT_LEVEL)
    _fill_rect(img, ax, ay, ax + FIDUCIAL_THICK_PX, ay + FIDUCIAL_ARM_PX, BRIGHT_LEVEL)


def render_frame_pixels(
    scene: Scene,
    camera_xy: tuple[float, float],
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Deterministic glyph composition; noise (if given) is added and clipped."""
    if not scene.camera_in_bounds(*camera_xy):
        raise CameraOutOfScene(f"camera at {camera_xy} outside scene bounds")

    img = np.full((scene.frame_height, scene.frame_width), BG_LEVEL, dtype=np.uint8)

    cx, cy = scene.chip_center
    w, h = scene.chip_size
    x0, y0 = world_to_px(scene, camera_xy, cx - w / 2, cy - h / 2)
    x1, y1 = world_to_px(scene, camera_xy, cx + w / 2, cy + h / 2)
    _fill_rect(img, round(x0), round(y0), round(x1), round(y1), CHIP_LEVEL)
    draw_corner_fiducial(img, round(x0), round(y0))

    # waveguides between coupler pairs, drawn under the taper glyphs
    by_dev: dict[str, dict[str, tuple[float, float]]] = {}
    for c in scene.couplers:
        by_dev.setdefault(c.device_id, {})[c.port] = (c.x, c.y)
    for ports in by_dev.values():
        if "in" in ports and "out" in ports:
            ix, iy = world_to_px(scene, camera_xy, *ports["in"])
            ox, _ = world_to_px(scene, camera_xy, *ports["out"])
            _fill_rect(img, round(ix), round(iy), round(ox) + 1, round(iy) + 1, GUIDE_LEVEL)

    for c in scene.couplers:
        px, py = world_to_px(scene, camera_xy, c.x, c.y)
        draw_coupler(img, round(px), round(py), "left" if c.port == "in" else "right")

    for side, (tx, ty, _tz) in scene.fiber_tips.items():
        px, py = world_to_px(scene, camera_xy, tx, ty)
        draw_fiber_tip(img, round(px), round(py), side)

    if noise is not None:
        img = np.clip(img.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return img


def make_noise_field(
    shape: tuple[int, int], sigma: float, seed: int
) -> np.ndarray:
    """Per-pixel Gaussian noise in DN (sigma given in 0..1 units). Derived
    from the seed only, so repeated grabs without motion are bit-identical."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED_F1E1D]))
    return np.round(rng.standard_normal(shape) * sigma * 255.0).astype(np.int16)


def render_frame(
    scene: Scene,
    camera_encoder: tuple[float, float, float],
    exposure_id: int = 0,
    noise: np.ndarray | None = None,
) -> Frame:
    pixels = render_frame_pixels(scene, (camera_encoder[0], camera_encoder[1]), noise)
    return Frame(
        width=scene.frame_width,
        height=scene.frame_height,
        pixel_data=pixels,
        camera_encoder=camera_encoder,
        exposure_id=exposure_id,
    )
