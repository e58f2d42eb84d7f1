"""Monitor tests: EWMA, CUSUM, stability gate, realign policy, persistence."""

import math
from pathlib import Path

import numpy as np
import pytest

from atomics.errors import ReferenceUnset, WindowTooShort
from atomics.monitor import (
    AlarmLog,
    CusumState,
    EwmaState,
    RealignAction,
    TelemetryLog,
    cusum_update,
    estimate_sigma,
    ewma_update,
    realign_decision,
    stability_check,
)


def test_ewma_fixed_point():
    s = EwmaState(mean=1e-3, variance=0.0, n_samples=1)
    for _ in range(100):
        s = ewma_update(s, 1e-3)
    assert s.mean == pytest.approx(1e-3)
    assert s.variance == pytest.approx(0.0, abs=1e-30)


def test_ewma_step_crossing_sample_14():
    """Closed form: mean_n = 2 - 1*(0.95)^n crosses 1.5 at n = 14."""
    n_cross = math.ceil(math.log(0.5) / math.log(0.95))
    assert n_cross == 14
    s = EwmaState(mean=1e-3, variance=0.0, n_samples=1)
    crossed_at = None
    for n in range(1, 40):
        s = ewma_update(s, 2e-3)
        if crossed_at is None and s.mean >= 1.5e-3:
            crossed_at = n
    assert crossed_at == 14


def test_ewma_degenerate_lambda():
    s = EwmaState(lam=1.0)
    s = ewma_update(s, 5.0)
    s = ewma_update(s, 3.0)
    assert s.mean == 3.0


def test_ewma_halving_property():
    """|mean - x| halves every ceil(ln .5 / ln(1-lam)) samples."""
    period = math.ceil(math.log(0.5) / math.log(0.95))
    s = EwmaState(mean=1.0, variance=0.0, n_samples=1)
    gaps = [abs(s.mean - 2.0)]
    for k in range(3 * period):
        s = ewma_update(s, 2.0)
        gaps.append(abs(s.mean - 2.0))
    for k in range(1, 3):
        assert gaps[k * period] <= gaps[(k - 1) * period] / 2 + 1e-12


def test_cusum_zero_at_reference():
    s = CusumState().with_reference(1e-3, 1e-5)
    for _ in range(1000):
        s, alarm = cusum_update(s, 1e-3)
        assert not alarm
        assert s.g_pos == 0.0


def test_cusum_hand_iterated_one_sigma_h5():
    """Spec example parameters: 1-sigma sustained drop with k=0.5, h=5
    alarms exactly at sample 10 (g+ grows 0.5/sample, 0.5*10 = 5 >= h)."""
    s = CusumState(k=0.5, h=5.0).with_reference(1.0, 0.01)
    # independent hand-iterated oracle
    g, alarm_at = 0.0, None
    for n in range(1, 20):
        g = max(0.0, g + 1.0 - 0.5)
        if g >= 5.0:
            alarm_at = n
            break
    assert alarm_at == 10

    fired = None
    for n in range(1, 20):
        s, alarm = cusum_update(s, 1.0 - 0.01)
        if alarm:
            fired = n
            break
    assert fired == 10


def test_cusum_two_sigma_exact_at_10_with_defaults():
    """At defaults (k=0.5, h=14) a sustained 2-sigma drop accumulates
    1.5/sample: 13.5 < 14 <= 15, so the alarm lands exactly on sample 10."""
    s = CusumState().with_reference(1.0, 0.01)
    fired = None
    for n in range(1, 30):
        s, alarm = cusum_update(s, 1.0 - 0.02)
        if alarm:
            fired = n
            break
    assert fired == 10


def test_cusum_false_alarm_rate():
    """Zero-shift ARL at defaults: under 10 alarms in 1e5 noise samples."""
    rng = np.random.default_rng(17)
    s = CusumState().with_reference(1.0, 0.01)
    alarms = 0
    for x in 1.0 + 0.01 * rng.standard_normal(100_000):
        s, alarm = cusum_update(s, float(x))
        alarms += alarm
    assert alarms < 10


def test_cusum_upward_shift_logs_not_alarms():
    s = CusumState().with_reference(1.0, 0.01)
    for _ in range(100):
        s, alarm = cusum_update(s, 1.0 + 0.05)  # 5 sigma brighter
        assert not alarm
    assert s.g_neg > 10
    assert s.g_pos == 0.0


def test_cusum_reference_unset():
    with pytest.raises(ReferenceUnset):
        cusum_update(CusumState(), 1.0)


def test_estimate_sigma_gaussian():
    rng = np.random.default_rng(5)
    samples = list(1e-3 + 1e-5 * rng.standard_normal(2000))
    assert estimate_sigma(samples) == pytest.approx(1e-5, rel=0.1)


def test_stability_constant_window():
    v = stability_check([1e-3] * 20, 1e-3)
    assert v.stable
    assert v.window_rsd == pytest.approx(0.0, abs=1e-12)


def test_stability_single_deep_sample_breaks():
    window = [1e-3] * 19 + [1e-3 * 10 ** (-0.2)]  # one sample at -2 dB
    v = stability_check(window, 1e-3, lock_threshold_db=1.0)
    assert not v.stable


def test_stability_window_too_short():
    with pytest.raises(WindowTooShort):
        stability_check([1e-3] * 19, 1e-3)


def test_stability_monte_carlo_noisy_lock():
    """sigma_rel = 1% noise passes the gate in at least 99/100 windows."""
    rng = np.random.default_rng(23)
    stable = 0
    for _ in range(100):
        window = list(1e-3 * (1 + 0.01 * rng.standard_normal(20)))
        stable += stability_check(window, 1e-3).stable
    assert stable >= 99


def test_realign_decision_table():
    assert realign_decision(False, 1e-3, 1e-8) is RealignAction.NONE
    assert realign_decision(True, 1e-3 * 10 ** (-0.15), 1e-8) is RealignAction.FINE_REALIGN
    assert realign_decision(True, 1e-9, 1e-8) is RealignAction.FULL_RECOUPLE


def test_monitor_has_no_hal_dependency():
    import atomics.monitor as monitor_pkg

    src_dir = Path(monitor_pkg.__file__).parent
    for path in src_dir.glob("*.py"):
        text = path.read_text()
        assert "hal" not in text, f"{path.name} references the hardware layer"


def test_telemetry_log_decimation(tmp_path):
    log = TelemetryLog(tmp_path / "t.csv", decimation=10)
    for i in range(100):
        log.add(float(i), 1e-3, "locked", "power_meter")
    log.close()
    lines = (tmp_path / "t.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 10


def test_alarm_log_jsonl(tmp_path):
    log = AlarmLog(tmp_path / "a.jsonl")
    log.add({"t": 1.0, "kind": "drift_alarm"})
    log.add({"t": 2.0, "kind": "drift_alarm"})
    log.close()
    import json

    lines = (tmp_path / "a.jsonl").read_text().strip().splitlines()
    assert [json.loads(l)["t"] for l in lines] == [1.0, 2.0]
