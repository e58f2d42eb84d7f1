"""Renderer geometry tests with an independent intensity-centroid oracle."""

import numpy as np
import pytest

from atomics.errors import CameraOutOfScene
from atomics.simbench import default_scene
from atomics.simbench.render import (
    BRIGHT_LEVEL,
    render_frame_pixels,
    world_to_px,
)

from conftest import make_world


def bright_centroid(img, cx, cy, radius=8, level=200):
    """Oracle: intensity centroid of pixels above `level` near (cx, cy)."""
    x0, x1 = int(cx - radius), int(cx + radius + 1)
    y0, y1 = int(cy - radius), int(cy + radius + 1)
    win = img[y0:y1, x0:x1].astype(float)
    mask = win > level
    assert mask.any(), "no bright pixels in window"
    ys, xs = np.nonzero(mask)
    w = win[ys, xs]
    return (x0 + np.average(xs, weights=w), y0 + np.average(ys, weights=w))


def test_tip_centered_in_view():
    world = make_world(noiseless=True)
    scene = world.make_scene_snapshot()
    tip = scene.fiber_tips["left"]
    img = render_frame_pixels(scene, (tip[0], tip[1]))
    cx, cy = scene.frame_width / 2, scene.frame_height / 2
    gx, gy = bright_centroid(img, cx, cy)
    assert abs(gx - cx) <= 0.5
    assert abs(gy - cy) <= 0.5


def test_camera_translation_shifts_centroids():
    world = make_world(noiseless=True)
    scene = world.make_scene_snapshot()
    tip = scene.fiber_tips["left"]
    cam0 = (tip[0], tip[1])
    img0 = render_frame_pixels(scene, cam0)
    img1 = render_frame_pixels(scene, (cam0[0] + 50.0, cam0[1]))
    shift = 50.0 * scene.pixels_per_um
    c0 = bright_centroid(img0, scene.frame_width / 2, scene.frame_height / 2)
    c1 = bright_centroid(img1, scene.frame_width / 2 - shift, scene.frame_height / 2)
    assert c1[0] - c0[0] == pytest.approx(-shift, abs=0.5)
    assert c1[1] - c0[1] == pytest.approx(0.0, abs=0.5)


def test_scale_bar_200um():
    """Two couplers 200 um apart span 200 * pixels_per_um pixels."""
    world = make_world(noiseless=True)
    scene = world.make_scene_snapshot()
    col = sorted(
        [c for c in scene.couplers if c.port == "in"], key=lambda c: c.y
    )
    a, b = col[0], col[4]  # 4 * 50 um pitch = 200 um
    assert b.y - a.y == pytest.approx(200.0)
    cam = ((a.x + b.x) / 2, (a.y + b.y) / 2)
    img = render_frame_pixels(scene, cam)
    pa = world_to_px(scene, cam, a.x, a.y)
    pb = world_to_px(scene, cam, b.x, b.y)
    ca = bright_centroid(img, *pa, radius=10)
    cb = bright_centroid(img, *pb, radius=10)
    assert cb[1] - ca[1] == pytest.approx(200.0 * scene.pixels_per_um, abs=1.0)


def test_couplers_form_two_columns():
    scene = default_scene()
    xs = {c.x for c in scene.couplers}
    assert len(xs) == 2


def test_camera_out_of_scene():
    world = make_world(noiseless=True)
    scene = world.make_scene_snapshot()
    with pytest.raises(CameraOutOfScene):
        render_frame_pixels(scene, (5000.0, 0.0))


def test_drift_moves_rendered_tip():
    world = make_world(noiseless=True)
    world.towers["left"].drift = type(world.towers["left"].drift)(dx=10.0, dy=0.0)
    world.drift_enabled = False  # freeze the injected offset
    scene = world.make_scene_snapshot()
    park_x = world.towers["left"].motion[list(world.towers["left"].motion)[0]].true_position
    assert scene.fiber_tips["left"][0] == pytest.approx(park_x + 10.0)


def test_power_and_pixel_streams_reproducible():
    from atomics.hal import Axis, AxisId, Tower
    from atomics.simbench.world import make_bench

    axis = AxisId(Tower.LEFT_FIBER, Axis.X)

    def run():
        w = make_world(seed=42)
        b = make_bench(w)
        powers = [b.read_power().power for _ in range(10)]
        b.move_absolute(axis, b.commanded(axis) + 1.0)
        powers += [b.read_power().power for _ in range(10)]
        return powers, b.grab_frame().pixel_data

    p1, f1 = run()
    p2, f2 = run()
    assert p1 == p2
    assert np.array_equal(f1, f2)
