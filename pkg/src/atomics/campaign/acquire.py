"""Dataset acquisition through the routed DAQ, persisted as a binary
columnar file plus a JSON sidecar carrying metadata and a content hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import NotLocked


class DaqKind(Enum):
    OSCILLOSCOPE = "oscilloscope"
    FREQUENCY_COUNTER = "frequency_counter"
    SPECTRUM_ANALYZER = "spectrum_analyzer"
    GENERIC_DAQ = "generic_daq"


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: DaqKind
    duration_s: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class DatasetRef:
    path: str
    sidecar: str
    sha256: str
    n_samples: int


def acquire(engine, spec: AcquisitionSpec, tag: str) -> DatasetRef:
    """Run one acquisition: requires Locked with the switch on the DAQ.
    The trace lands in <run_dir>/datasets/<tag>.npy with a .json sidecar."""
    from ..align import CouplingState
    from ..hal.signals import SwitchRoute

    if engine.fsm.state is not CouplingState.LOCKED:
        raise NotLocked(f"acquire requires Locked, engine is {engine.fsm.state.value}")
    if engine.bench.route is not SwitchRoute.DAQ:
        raise NotLocked("acquire requires the switch routed to the DAQ")

    trace = np.asarray(
        engine.bench.acquire_daq(spec.kind.value, spec.duration_s, spec.parameters)
    )
    dataset_dir = Path(engine.run_dir) / "datasets"
    dataset_dir.mkdir(parents=True, exist_ok=True)
    path = dataset_dir / f"{tag}.npy"
    np.save(path, trace)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    meta = {
        "kind": spec.kind.value,
        "duration_s": spec.duration_s,
        "parameters": spec.parameters,
        "n_samples": int(trace.size),
        "sha256": digest,
        "acquired_at_s": engine.clock.now(),
        "device": engine.active_device,
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return DatasetRef(
        path=str(path), sidecar=str(sidecar), sha256=digest, n_samples=int(trace.size)
    )
