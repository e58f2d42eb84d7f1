"""Per-class glyph templates.

A template is a small grayscale patch plus the anchor: the pixel within
the patch that is the feature point (lens center for fiber tips, the
facet-edge midpoint for couplers, the chip's top-left corner for the chip
reference). Fiber-tip templates deliberately include a long stretch of
fiber body, which is what separates a lens from the similarly compact
coupler taper. Classes mirrored on the opposite facet carry a flipped
variant under the same class. Templates load from per-class PNG files at
startup; anchors ride in the PNG text metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from ..simbench.render import (
    BG_LEVEL,
    CHIP_LEVEL,
    GUIDE_LEVEL,
    draw_corner_fiducial,
    draw_coupler,
    draw_fiber_tip,
)
from .types import DetClass


@dataclass(frozen=True)
class GlyphTemplate:
    image: np.ndarray
    anchor: tuple[float, float]  # feature point within the patch, (x, y)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


Templates = dict[DetClass, list[GlyphTemplate]]


def _fiber_tip_template(side: str) -> GlyphTemplate:
    # [body 16][neck 22][lens 11][ahead 10]: the long neck-and-body profile
    # is what separates a lens from a coupler taper or a bare cladding band
    h, w = 24, 59
    lens_x = 43 if side == "left" else w - 1 - 43
    canvas = np.full((h, w), BG_LEVEL, dtype=np.uint8)
    draw_fiber_tip(canvas, lens_x, h // 2, side)
    return GlyphTemplate(canvas, (float(lens_x), float(h // 2)))


def _coupler_template(port: str) -> GlyphTemplate:
    # narrow background strip outside the facet: a bare facet edge must not
    # carry enough of the template energy to cross the score threshold
    h, w_out, w_in = 28, 6, 32
    w = w_out + w_in
    canvas = np.full((h, w), BG_LEVEL, dtype=np.uint8)
    canvas[:, w_out:] = CHIP_LEVEL
    canvas[h // 2, w_out:] = GUIDE_LEVEL
    draw_coupler(canvas, w_out, h // 2, "left")
    if port == "out":
        return GlyphTemplate(np.fliplr(canvas).copy(), (float(w - 1 - w_out), float(h // 2)))
    return GlyphTemplate(canvas, (float(w_out), float(h // 2)))


def _chip_corner_template() -> GlyphTemplate:
    h, w = 40, 40
    canvas = np.full((h, w), BG_LEVEL, dtype=np.uint8)
    canvas[h // 2 :, w // 2 :] = CHIP_LEVEL
    draw_corner_fiducial(canvas, w // 2, h // 2)
    return GlyphTemplate(canvas, (float(w // 2), float(h // 2)))


def default_templates() -> Templates:
    return {
        DetClass.FIBER_TIP_LEFT: [_fiber_tip_template("left")],
        DetClass.FIBER_TIP_RIGHT: [_fiber_tip_template("right")],
        DetClass.EDGE_COUPLER: [_coupler_template("in"), _coupler_template("out")],
        DetClass.CHIPLET_EDGE: [_chip_corner_template()],
    }


def save_templates(templates: Templates, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for cls, variants in templates.items():
        for i, t in enumerate(variants):
            suffix = "" if i == 0 else f"~{i}"
            meta = PngImagePlugin.PngInfo()
            meta.add_text("anchor", f"{t.anchor[0]},{t.anchor[1]}")
            Image.fromarray(t.image, mode="L").save(
                directory / f"{cls.value}{suffix}.png", pnginfo=meta
            )


def load_templates(directory: str | Path) -> Templates:
    """Load grayscale PNGs named <class>.png (variants <class>~N.png);
    anchors default to the patch center when the metadata is absent."""
    directory = Path(directory)
    out: Templates = {}
    for cls in DetClass:
        variants = []
        for path in sorted(directory.glob(f"{cls.value}*.png")):
            img = Image.open(path)
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
            text = img.info.get("anchor")
            if text:
                ax, ay = (float(v) for v in text.split(","))
            else:
                ax, ay = (arr.shape[1] - 1) / 2, (arr.shape[0] - 1) / 2
            variants.append(GlyphTemplate(arr, (ax, ay)))
        if variants:
            out[cls] = variants
    return out
