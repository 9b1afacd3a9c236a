"""Sample-efficiency, confidence-interval, and concentration-bound math."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

CI_Z_99 = 2.58


def sample_efficiency(sr_curve: Sequence[float]) -> float:
    """Mean success rate over the recorded frames."""
    if len(sr_curve) == 0:
        raise ValueError("empty success-rate curve")
    return float(np.mean(sr_curve))


def ci_over_seeds(seed_srs: Sequence[float]) -> tuple[float, float]:
    """(mean, 99% half-width) over per-seed success rates.

    Half-width = 2.58 * unbiased sample std / sqrt(num seeds).
    """
    s = len(seed_srs)
    if s < 2:
        raise ValueError("confidence interval needs at least 2 seeds")
    arr = np.asarray(seed_srs, dtype=np.float64)
    p_hat = float(arr.mean())
    tau_hat = float(arr.std(ddof=1))
    return p_hat, CI_Z_99 * tau_hat / math.sqrt(s)


def hoeffding_epsilon(n: int, delta: float) -> float:
    """Deviation bound with failure probability delta: 2*exp(-2*n*eps^2) = delta."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))
