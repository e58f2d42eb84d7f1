"""Layout, acquisition and campaign orchestration tests."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from atomics.campaign import (
    AcquisitionSpec,
    DaqKind,
    Traversal,
    acquire,
    default_layout,
    load_layout,
    run_campaign,
)
from atomics.campaign.layout import save_layout
from atomics.errors import NotLocked, OutOfRange, ParseError, ValidationError
from atomics.hal.signals import SwitchRoute

from test_align_pipeline import make_engine


def test_default_layout_two_columns(tmp_path):
    layout = default_layout(8)
    path = tmp_path / "layout.yaml"
    save_layout(layout, path)
    loaded = load_layout(path)
    assert len(loaded.devices) == 8
    xs = {d.input_coupler[0] for d in loaded.devices} | {
        d.output_coupler[0] for d in loaded.devices
    }
    assert xs == {-300.0, 300.0}


def test_layout_duplicate_ids_rejected(tmp_path):
    layout = default_layout(3)
    doc_path = tmp_path / "dup.yaml"
    save_layout(layout, doc_path)
    text = doc_path.read_text().replace("D2", "D1")
    doc_path.write_text(text)
    with pytest.raises(ValidationError, match="duplicate"):
        load_layout(doc_path)


def test_layout_out_of_extent_rejected():
    from atomics.campaign.layout import ChipLayout, DeviceSite

    layout = ChipLayout(
        chiplet_id="X",
        extent_um=(600.0, 500.0),
        left_facet_x=-300.0,
        right_facet_x=300.0,
        devices=[DeviceSite("D1", (-300.0, -800.0), (300.0, -800.0))],
    )
    with pytest.raises(ValidationError, match="extent"):
        layout.validate()


def test_layout_missing_field(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("chiplet_id: X\nextent_um: {width: 600, height: 500}\n")
    with pytest.raises(ParseError, match="facets"):
        load_layout(path)
    with pytest.raises(ParseError, match="not found"):
        load_layout(tmp_path / "nope.yaml")


def test_acquire_requires_locked_and_routed(tmp_path):
    eng = make_engine(tmp_path, seed=3)
    spec = AcquisitionSpec(DaqKind.OSCILLOSCOPE, 1.0, {"sample_rate_hz": 1000})
    with pytest.raises(NotLocked):
        acquire(eng, spec, "t0")
    outcome = eng.couple("D1")
    assert outcome.locked
    with pytest.raises(NotLocked):  # still routed to the power meter
        acquire(eng, spec, "t1")
    eng.bench.set_switch(SwitchRoute.DAQ)
    ref = acquire(eng, spec, "t2")
    eng.bench.set_switch(SwitchRoute.POWER_METER)
    assert ref.n_samples == 1000
    assert Path(ref.path).exists() and Path(ref.sidecar).exists()


def test_acquisition_hash_stable_under_seed(tmp_path):
    hashes = []
    for attempt in range(2):
        eng = make_engine(tmp_path / f"a{attempt}", seed=3)
        assert eng.couple("D1").locked
        eng.bench.set_switch(SwitchRoute.DAQ)
        spec = AcquisitionSpec(DaqKind.OSCILLOSCOPE, 1.0, {"sample_rate_hz": 1000})
        hashes.append(acquire(eng, spec, "t").sha256)
    assert hashes[0] == hashes[1]


def test_frequency_counter_gate_readings(tmp_path):
    eng = make_engine(tmp_path, seed=3)
    assert eng.couple("D1").locked
    eng.bench.set_switch(SwitchRoute.DAQ)
    spec = AcquisitionSpec(DaqKind.FREQUENCY_COUNTER, 10.0, {"gate_time_s": 1.0})
    ref = acquire(eng, spec, "fc")
    assert ref.n_samples == 10


def test_empty_layout_campaign(tmp_path):
    eng = make_engine(tmp_path, seed=0)
    layout = default_layout(8)
    layout.devices = []
    report = run_campaign(eng, layout, [])
    assert report.devices == []
    assert report.all_coupled


def test_single_device_campaign(tmp_path):
    layout = default_layout(1)
    eng = make_engine(tmp_path, seed=1, layout=layout)
    specs = [AcquisitionSpec(DaqKind.OSCILLOSCOPE, 0.5, {"sample_rate_hz": 500})]
    report = run_campaign(eng, layout, specs)
    assert len(report.devices) == 1
    d = report.devices[0]
    assert d.coupled, d.error
    optimum_il = -20 * math.log10(eng.config.sim.eta0)
    assert d.insertion_loss_db == pytest.approx(optimum_il, abs=0.05)
    assert len(d.acquisitions) == 1
    assert d.environment["pressure_label"] == "ambient"


def test_campaign_report_device_uniqueness(tmp_path):
    layout = default_layout(3)
    eng = make_engine(tmp_path, seed=2, layout=layout)
    report = run_campaign(eng, layout, [], traversal=Traversal.MOVE_CHIPLET)
    ids = [d.device_id for d in report.devices]
    assert ids == sorted(ids, key=lambda i: int(i[1:]))
    assert len(set(ids)) == len(layout.devices)


def test_set_tilt_gating(tmp_path):
    eng = make_engine(tmp_path, seed=0)
    eng.set_tilt(0.0)
    with pytest.raises(OutOfRange):
        eng.set_tilt(10.5)
    eng.fsm.state = __import__("atomics.align", fromlist=["CouplingState"]).CouplingState.FINE_ALIGN
    from atomics.errors import IllegalInState

    with pytest.raises(IllegalInState):
        eng.set_tilt(5.0)
