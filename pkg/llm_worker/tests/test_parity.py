"""Normalization parity: the worker's softmax math against a high-precision oracle.

The master repository pins its distribution math to the same oracle, so
agreement here transitively guarantees agreement with the master within 1e-9.
"""
from __future__ import annotations

import mpmath
import numpy as np
import pytest

from llm_worker.training import normalize_probs


def oracle_renormalize(probs):
    mpmath.mp.dps = 50
    p = [mpmath.mpf(str(x)) for x in probs]
    total = sum(p)
    return [float(x / total) for x in p]


def oracle_max_temperature(probs):
    mpmath.mp.dps = 50
    p = [mpmath.mpf(str(x)) for x in probs]
    tau = max(p)
    exps = [mpmath.e ** (x / tau) for x in p]
    total = sum(exps)
    return [float(e / total) for e in exps]


class TestNormalizationParity:
    def test_fixed_example(self):
        got = normalize_probs([0.6, 0.2], "max_temperature")
        assert got == pytest.approx([0.6608, 0.3392], abs=5e-5)
        assert got == pytest.approx(oracle_max_temperature([0.6, 0.2]), abs=1e-12)

    @pytest.mark.parametrize("normalization,oracle", [
        ("renormalize", oracle_renormalize),
        ("max_temperature", oracle_max_temperature),
    ])
    def test_randomized_against_oracle(self, normalization, oracle):
        rng = np.random.default_rng(17)
        for _ in range(200):
            probs = rng.uniform(1e-12, 1.0, size=int(rng.integers(2, 9)))
            got = normalize_probs(probs, normalization)
            assert abs(got.sum() - 1.0) <= 1e-9
            assert got == pytest.approx(oracle(probs), abs=1e-9)

    def test_unknown_normalization(self):
        with pytest.raises(ValueError):
            normalize_probs([0.5, 0.5], "softplus")
