"""Spiral path and log-quadratic fit tests."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomics.align import ScanResult, fit_log_quadratic, ring_radius, spiral_offsets
from atomics.errors import InvalidFit
from atomics.simbench import SimConfig, coupled_power


def test_spiral_first_nine_offsets():
    p = 1.0
    got = list(itertools.islice(spiral_offsets(p), 9))
    assert got == [
        (0.0, 0.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
    ]


@pytest.mark.parametrize("radius", [1, 3, 7, 20])
def test_spiral_coverage_exact(radius):
    """Every lattice point with max-norm radius <= R appears exactly once
    before any point of radius R+1."""
    n_inside = (2 * radius + 1) ** 2
    pts = list(itertools.islice(spiral_offsets(1.0), n_inside + 1))
    inside = pts[:n_inside]
    assert len(set(inside)) == n_inside
    assert all(ring_radius(p) <= radius for p in inside)
    assert ring_radius(pts[n_inside]) == radius + 1


def test_ring_radius_max_norm():
    assert ring_radius((2.5, -1.0)) == 2.5
    assert ring_radius((0.0, 0.0)) == 0.0


def test_parabola_vertex_closed_form():
    """Exact parabola through y(-1)=-1.69, y(0)=-0.09, y(1)=-0.49 has its
    vertex at 0.5*(y- - y+)/(y- - 2 y0 + y+) = 0.3."""
    ym, y0, yp = -1.69, -0.09, -0.49
    oracle = 0.5 * (ym - yp) / (ym - 2 * y0 + yp)
    assert oracle == pytest.approx(0.3)
    dark = 1e-9
    scan = ScanResult(
        axis_id="left_fiber.x",
        positions=np.array([-1.0, 0.0, 1.0]),
        powers=dark + np.exp([ym, y0, yp]),
    )
    assert fit_log_quadratic(scan, dark) == pytest.approx(0.3, abs=1e-12)


def test_fit_rejects_monotone_powers():
    scan = ScanResult(
        axis_id="left_fiber.x",
        positions=np.linspace(-1, 1, 7),
        powers=np.linspace(1e-6, 5e-6, 7),
    )
    with pytest.raises(InvalidFit):
        fit_log_quadratic(scan, 1e-9)


def test_fit_rejects_convex():
    xs = np.linspace(-1, 1, 7)
    scan = ScanResult(
        axis_id="left_fiber.x", positions=xs, powers=1e-9 + np.exp(xs**2)
    )
    with pytest.raises(InvalidFit):
        fit_log_quadratic(scan, 1e-9)


def test_fit_rejects_power_at_dark():
    scan = ScanResult(
        axis_id="left_fiber.x",
        positions=np.linspace(-1, 1, 5),
        powers=np.array([1e-9, 2e-9, 3e-9, 2e-9, 1e-9]),
    )
    with pytest.raises(InvalidFit):
        fit_log_quadratic(scan, 1e-9)


@given(peak=st.floats(-1.0, 1.0), dy=st.floats(0, 2), dz=st.floats(-5, 5))
@settings(max_examples=60)
def test_fit_recovers_model_peak_exactly(peak, dy, dz):
    """Noiseless scans of the coupling model recover the planted peak to
    1e-9 um: ln(P - dark) is exactly quadratic laterally."""
    cfg = SimConfig()
    xs = np.linspace(peak - 2.0, peak + 2.0, 7)
    powers = np.array(
        [coupled_power((x - peak, dy, dz), cfg.theta_opt_deg, cfg) for x in xs]
    )
    scan = ScanResult(axis_id="left_fiber.x", positions=xs, powers=powers)
    vertex = fit_log_quadratic(scan, cfg.p_dark_w)
    assert vertex == pytest.approx(peak, abs=1e-9)
