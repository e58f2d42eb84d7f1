"""EWMA smoothing and the one-sided CUSUM drift detector."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..errors import ReferenceUnset

DEFAULT_LAMBDA = 0.05
DEFAULT_K_SIGMA = 0.5
# Picked for the required false-alarm economics: with k = 0.5 the
# zero-shift average run length is ~exp(2k(h+1.166))-scaled, giving ~1e6
# samples at h = 14 (h = 5 would alarm every ~9e2). A sustained 2-sigma
# drop still trips at exactly sample 10: 10*(2-0.5) = 15 >= 14.
DEFAULT_H_SIGMA = 14.0


@dataclass(frozen=True)
class EwmaState:
    mean: float = 0.0
    variance: float = 0.0
    lam: float = DEFAULT_LAMBDA
    n_samples: int = 0


def ewma_update(state: EwmaState, x: float) -> EwmaState:
    """mean <- (1-lam) mean + lam x; the variance recursion uses the
    pre-update mean. The first sample initializes the filter."""
    if x < 0:
        raise ValueError("power must be >= 0")
    if state.n_samples == 0:
        return replace(state, mean=x, variance=0.0, n_samples=1)
    lam = state.lam
    variance = (1 - lam) * (state.variance + lam * (x - state.mean) ** 2)
    mean = (1 - lam) * state.mean + lam * x
    return replace(state, mean=mean, variance=variance, n_samples=state.n_samples + 1)


@dataclass(frozen=True)
class CusumState:
    """One-sided downward CUSUM on normalized deviations from the locked
    reference; the symmetric upward statistic is tracked but only logged
    (a brighter laser is not a misalignment)."""

    reference: float | None = None
    sigma: float | None = None
    k: float = DEFAULT_K_SIGMA
    h: float = DEFAULT_H_SIGMA
    g_pos: float = 0.0
    g_neg: float = 0.0

    def with_reference(self, reference: float, sigma: float) -> "CusumState":
        return replace(self, reference=reference, sigma=max(sigma, 1e-30), g_pos=0.0, g_neg=0.0)


def cusum_update(state: CusumState, x: float) -> tuple[CusumState, bool]:
    """Returns (state, alarm). Alarm fires when g+ reaches h; both
    statistics reset to zero on alarm."""
    if state.reference is None or state.sigma is None:
        raise ReferenceUnset("set the locked reference before streaming samples")
    z = (state.reference - x) / state.sigma
    g_pos = max(0.0, state.g_pos + z - state.k)
    g_neg = max(0.0, state.g_neg - z - state.k)
    alarm = g_pos >= state.h
    if alarm:
        g_pos = 0.0
        g_neg = 0.0
    return replace(state, g_pos=g_pos, g_neg=g_neg), alarm


def estimate_sigma(samples: list[float]) -> float:
    """Robust noise scale: scaled median absolute deviation."""
    if not samples:
        raise ValueError("need samples to estimate sigma")
    s = sorted(samples)
    n = len(s)
    med = s[n // 2] if n % 2 else 0.5 * (s[n // 2 - 1] + s[n // 2])
    dev = sorted(abs(x - med) for x in samples)
    mad = dev[n // 2] if n % 2 else 0.5 * (dev[n // 2 - 1] + dev[n // 2])
    return max(1.4826 * mad, 1e-30)
