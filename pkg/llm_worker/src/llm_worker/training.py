"""PPO shard loss and optimizer, matching the scoring-service update contract."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
import torch

from .adapter import LMAdapter


def log_policy(summed_logprobs: torch.Tensor, normalization: str) -> torch.Tensor:
    """Per-action log pi from summed token log-probs (one prompt's candidates)."""
    if normalization == "renormalize":
        return torch.log_softmax(summed_logprobs, dim=-1)
    if normalization == "max_temperature":
        scaled = torch.exp(summed_logprobs - summed_logprobs.max())
        return torch.log_softmax(scaled, dim=-1)
    raise ValueError(f"unknown normalization {normalization!r}")


def normalize_probs(raw_probs: np.ndarray, normalization: str) -> np.ndarray:
    """Numpy twin of log_policy over raw action probabilities."""
    lp = torch.log(torch.tensor(np.asarray(raw_probs, dtype=np.float64)))
    return torch.exp(log_policy(lp, normalization)).numpy()


@dataclass
class Shard:
    prompts: list[str]
    candidates: list[list[str]]
    action_indices: np.ndarray
    old_logprobs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.prompts)


@dataclass(frozen=True)
class LossConfig:
    clip_eps: float = 0.2
    vf_coef: float = 0.5
    entropy_coef: float = 0.01
    normalization: str = "max_temperature"
    advantage_normalization: bool = False


def ppo_shard_loss(adapter: LMAdapter, shard: Shard, config: LossConfig) -> tuple[torch.Tensor, dict]:
    advantages = shard.advantages
    if config.advantage_normalization and len(advantages) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    new_logprobs = []
    entropies = []
    values = []
    for prompt, cands, action in zip(shard.prompts, shard.candidates, shard.action_indices):
        summed = adapter.score_graph(prompt, cands)
        log_pi = log_policy(summed, config.normalization)
        new_logprobs.append(log_pi[int(action)])
        entropies.append(-(torch.exp(log_pi) * log_pi).sum())
        values.append(adapter.value_graph(prompt))
    new_logprob = torch.stack(new_logprobs)
    entropy = torch.stack(entropies).mean()
    value = torch.stack(values)

    old = torch.tensor(shard.old_logprobs, dtype=torch.float64)
    adv = torch.tensor(advantages, dtype=torch.float64)
    ret = torch.tensor(shard.returns, dtype=torch.float64)
    ratio = torch.exp(new_logprob - old)
    clipped = torch.clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps)
    policy_loss = -torch.minimum(ratio * adv, clipped * adv).mean()
    value_loss = ((value - ret) ** 2).mean()
    total = policy_loss + config.vf_coef * value_loss - config.entropy_coef * entropy
    if not torch.isfinite(total):
        raise FloatingPointError("non-finite PPO shard loss")
    stats = {
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy.detach()),
        "total": float(total.detach()),
    }
    return total, stats


def ppo_shard_grad(adapter: LMAdapter, shard: Shard, config: LossConfig) -> tuple[np.ndarray, dict]:
    adapter.zero_grad()
    total, stats = ppo_shard_loss(adapter, shard, config)
    total.backward()
    return adapter.flat_grad(), stats


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm and norm > 0.0:
        return grad * (max_norm / norm)
    return grad


class Adam:
    """Flat-vector Adam with the standard finetuning defaults (lr 1e-6, eps 1e-5)."""

    def __init__(self, size: int, lr: float = 1e-6, eps: float = 1e-5, beta1: float = 0.9, beta2: float = 0.999):
        self.lr = lr
        self.eps = eps
        self.beta1 = beta1
        self.beta2 = beta2
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.t = 0

    def matches(self, lr: float, eps: float, beta1: float, beta2: float) -> bool:
        return (self.lr, self.eps, self.beta1, self.beta2) == (lr, eps, beta1, beta2)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
