"""Long-horizon persistence: decimated telemetry CSV and alarm JSON Lines."""

from __future__ import annotations

import csv
import json
from pathlib import Path


class TelemetryLog:
    """Appends every Nth sample to a CSV of (timestamp, watts, state, route);
    10x decimation keeps a month of 10 Hz lock telemetry at ~2.6M rows."""

    def __init__(self, path: str | Path, decimation: int = 10):
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        self.path = Path(path)
        self.decimation = decimation
        self._count = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(["timestamp_s", "power_w", "state", "route"])

    def add(self, timestamp: float, power_w: float, state: str, route: str) -> None:
        self._count += 1
        if self._count % self.decimation == 0:
            self._writer.writerow([f"{timestamp:.3f}", f"{power_w:.6e}", state, route])

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()


class AlarmLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")

    def add(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()
