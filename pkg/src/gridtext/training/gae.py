"""Generalized advantage estimation over per-environment contiguous segments."""
from __future__ import annotations

import numpy as np


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward recursion: A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t, with V beyond the
    segment end taken from bootstrap_value. Returns (advantages, returns) where
    returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError(
            f"length mismatch: rewards={len(rewards)} values={len(values)} dones={len(dones)}"
        )
    n = len(rewards)
    advantages = np.zeros(n, dtype=np.float64)
    next_value = float(bootstrap_value)
    next_advantage = 0.0
    for t in range(n - 1, -1, -1):
        mask = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * mask - values[t]
        next_advantage = delta + gamma * lam * mask * next_advantage
        advantages[t] = next_advantage
        next_value = values[t]
    return advantages, advantages + values
