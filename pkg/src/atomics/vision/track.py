"""Nearest-centroid single-object-per-class tracking with gating."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .types import DetClass, Detection

DEFAULT_GATE_PX = 20.0
DEFAULT_MISS_LIMIT = 5
NEW_TRACK_MIN_SCORE = 0.7


@dataclass
class Track:
    centroid: tuple[float, float]
    last_seen: int
    misses: int = 0


@dataclass
class TrackState:
    gate_px: float = DEFAULT_GATE_PX
    miss_limit: int = DEFAULT_MISS_LIMIT
    tracks: dict[DetClass, Track] = field(default_factory=dict)

    def centroid(self, cls: DetClass) -> tuple[float, float] | None:
        t = self.tracks.get(cls)
        return t.centroid if t else None

    def lost(self, cls: DetClass) -> bool:
        return cls not in self.tracks


def track(
    state: TrackState, detections: list[Detection], exposure_id: int
) -> tuple[TrackState, dict[DetClass, Detection | None]]:
    """Assign one detection per class to its track by nearest centroid
    within the gate; unmatched tracks age out after miss_limit frames;
    unassigned high-score detections open new tracks."""
    assignments: dict[DetClass, Detection | None] = {}
    by_class: dict[DetClass, list[Detection]] = {}
    for det in detections:
        by_class.setdefault(det.cls, []).append(det)

    for cls in DetClass:
        candidates = by_class.get(cls, [])
        existing = state.tracks.get(cls)
        chosen: Detection | None = None
        if existing is not None and candidates:
            nearest = min(
                candidates,
                key=lambda d: math.dist(d.centroid, existing.centroid),
            )
            if math.dist(nearest.centroid, existing.centroid) <= state.gate_px:
                chosen = nearest
        if chosen is None and existing is None and candidates:
            best = max(candidates, key=lambda d: d.score)
            if best.score >= NEW_TRACK_MIN_SCORE:
                chosen = best

        if chosen is not None:
            state.tracks[cls] = Track(centroid=chosen.centroid, last_seen=exposure_id)
            assignments[cls] = chosen
        else:
            if existing is not None:
                existing.misses += 1
                if existing.misses > state.miss_limit:
                    del state.tracks[cls]
            assignments[cls] = None
    return state, assignments
