"""Search-path and fit primitives: the square capture spiral and the
log-quadratic peak fit that line scans feed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import InvalidFit

MIN_R_SQUARED = 0.5


def spiral_offsets(pitch: float) -> Iterator[tuple[float, float]]:
    """Square-spiral lattice offsets from the origin, ring by ring:
    (0,0), (p,0), (p,p), (0,p), (-p,p), (-p,0), (-p,-p), (0,-p), (p,-p),
    (2p,-p), ... Every point of max-norm radius R is visited exactly once
    before any point of radius R+1."""
    x = y = 0
    yield (0.0, 0.0)
    leg = 1
    while True:
        for dx, dy in ((1, 0), (0, 1)):
            for _ in range(leg):
                x += dx
                y += dy
                yield (x * pitch, y * pitch)
        leg += 1
        for dx, dy in ((-1, 0), (0, -1)):
            for _ in range(leg):
                x += dx
                y += dy
                yield (x * pitch, y * pitch)
        leg += 1


def ring_radius(offset: tuple[float, float]) -> float:
    """Max-norm radius of a lattice offset, in the same units as the offset."""
    return max(abs(offset[0]), abs(offset[1]))


@dataclass(frozen=True)
class FitResult:
    vertex: float
    curvature: float
    r_squared: float
    peak_w: float = 0.0  # smoothed power estimate at the vertex


@dataclass
class ScanResult:
    axis_id: str
    positions: np.ndarray
    powers: np.ndarray
    fit: FitResult | None = None

    def argmax_position(self) -> float:
        return float(self.positions[int(np.argmax(self.powers))])

    def monotone(self) -> bool:
        d = np.diff(self.powers)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def fit_log_quadratic(scan: ScanResult, dark: float) -> float:
    """Vertex of the parabola fitted to (position, ln(power - dark)).

    Raises InvalidFit when any power is at or below the dark floor, the
    fitted curvature is not negative, the vertex extrapolates beyond the
    scanned range, or r^2 falls under 0.5 (noise swamped the curvature).
    """
    if np.any(scan.powers <= dark):
        raise InvalidFit("power at or below the dark floor in scan")
    x = np.asarray(scan.positions, dtype=float)
    y = np.log(np.asarray(scan.powers, dtype=float) - dark)
    coeffs = np.polyfit(x, y, 2)
    a, b, _ = coeffs
    residuals = y - np.polyval(coeffs, x)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot < 1e-18 else 1.0 - ss_res / ss_tot
    if a >= 0:
        raise InvalidFit(f"non-concave fit (a={a:.3g})")
    vertex = -b / (2 * a)
    if not (x.min() <= vertex <= x.max()):
        raise InvalidFit(f"vertex {vertex:.3g} outside scanned range")
    if r2 < MIN_R_SQUARED:
        raise InvalidFit(f"r^2 {r2:.3f} below {MIN_R_SQUARED}")
    peak_w = dark + math.exp(float(np.polyval(coeffs, vertex)))
    scan.fit = FitResult(
        vertex=float(vertex), curvature=float(a), r_squared=float(r2), peak_w=peak_w
    )
    return float(vertex)
