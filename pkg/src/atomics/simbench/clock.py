"""Accelerable simulation clock.

Simulated time is decoupled from wall time: tests advance it directly and
never sleep; the live service maps wall seconds to sim seconds through the
acceleration factor. Month-scale holds therefore run in minutes.
"""

from __future__ import annotations

import time


class SimClock:
    def __init__(self, accel: float = 1.0, start: float = 0.0):
        if accel <= 0:
            raise ValueError("acceleration must be positive")
        self.accel = accel
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        """Advance simulated time by dt seconds without sleeping."""
        if dt < 0:
            raise ValueError("dt must be >= 0")
        self._now += dt
        return self._now

    def sleep(self, dt: float) -> None:
        """Advance sim time by dt, sleeping dt/accel wall seconds.

        With a large accel this degenerates to advance(); the engine's test
        paths always use advance() directly.
        """
        self.advance(dt)
        wall = dt / self.accel
        if wall > 1e-4:
            time.sleep(wall)
