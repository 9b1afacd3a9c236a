"""Adam over flat parameter vectors, and global gradient-norm clipping.

The optimizer operates on plain float64 arrays so the exact same update runs
locally and on every remote worker, keeping replicas parameter-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamConfig:
    eps: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("betas must lie in (0, 1)")


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    """Scale grad so its global L2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm and norm > 0.0:
        grad = grad * (max_norm / norm)
    return grad, norm


class Adam:
    def __init__(self, size: int, lr: float, config: AdamConfig = AdamConfig()):
        self.lr = lr
        self.config = config
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        c = self.config
        self.t += 1
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * grad * grad
        m_hat = self.m / (1.0 - c.beta1**self.t)
        v_hat = self.v / (1.0 - c.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + c.eps)

    def state_dict(self) -> dict:
        return {
            "lr": self.lr,
            "config": self.config,
            "m": self.m.copy(),
            "v": self.v.copy(),
            "t": self.t,
        }

    @classmethod
    def from_state(cls, state: dict) -> "Adam":
        opt = cls(len(state["m"]), state["lr"], state["config"])
        opt.m = state["m"].copy()
        opt.v = state["v"].copy()
        opt.t = state["t"]
        return opt
