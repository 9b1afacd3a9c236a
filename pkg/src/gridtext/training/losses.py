"""PPO clipped-surrogate and behavioral-cloning losses over a scorer backend."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..policy.backends import ScorerBackend, log_policy_from_scores
from ..policy.distribution import CandidateAction, PolicyConfig, ScoringMode

ADV_NORM_EPS = 1e-8


@dataclass(frozen=True)
class PPOConfig:
    epochs: int = 4
    batch_size: int = 64
    entropy_coef: float = 0.01
    vf_coef: float = 0.5
    gamma: float = 0.99
    gae_lambda: float = 0.99
    clip_eps: float = 0.2
    max_grad_norm: float = 0.5
    # 1e-6 suits large pretrained scorers; the built-in backends stall there.
    lr: float = 3e-4
    advantage_normalization: bool = True
    steps_per_update: int = 1280
    num_envs: int = 32

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise ValueError("clip_eps must lie in (0, 1)")
        for name in ("epochs", "batch_size", "steps_per_update", "num_envs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.steps_per_update % self.num_envs != 0:
            raise ValueError("steps_per_update must divide evenly across environments")


@dataclass(frozen=True)
class BCConfig:
    dataset_size: int = 400_000
    epochs: int = 1
    lr: float = 5e-4
    batch_size: int = 64

    def __post_init__(self):
        if self.dataset_size <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("dataset_size, epochs and batch_size must be positive")


@dataclass
class LossBatch:
    """One minibatch of transitions ready for a gradient computation."""

    prompts: list[str]
    candidates: list[tuple[CandidateAction, ...]]
    action_indices: np.ndarray
    old_logprobs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.prompts)

    def slice(self, idx: np.ndarray) -> "LossBatch":
        return LossBatch(
            prompts=[self.prompts[i] for i in idx],
            candidates=[self.candidates[i] for i in idx],
            action_indices=self.action_indices[idx],
            old_logprobs=self.old_logprobs[idx],
            advantages=self.advantages[idx],
            returns=self.returns[idx],
        )


@dataclass(frozen=True)
class LossStats:
    policy_loss: float
    value_loss: float
    entropy: float
    total: float


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    if len(advantages) < 2:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + ADV_NORM_EPS)


def _ppo_total(
    batch: LossBatch,
    backend: ScorerBackend,
    config: PPOConfig,
    policy_config: PolicyConfig,
    normalize: bool,
) -> tuple[torch.Tensor, LossStats]:
    advantages = batch.advantages
    if normalize and config.advantage_normalization:
        advantages = normalize_advantages(advantages)
    scores, values = backend.scoring_graph(batch.prompts, batch.candidates)
    log_pi = log_policy_from_scores(scores, backend.mode, policy_config.normalization)
    idx = torch.tensor(batch.action_indices, dtype=torch.long)
    new_logprob = log_pi.gather(1, idx.unsqueeze(1)).squeeze(1)
    old = torch.tensor(batch.old_logprobs, dtype=torch.float64)
    adv = torch.tensor(advantages, dtype=torch.float64)
    ret = torch.tensor(batch.returns, dtype=torch.float64)

    ratio = torch.exp(new_logprob - old)
    clipped = torch.clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps)
    policy_loss = -torch.minimum(ratio * adv, clipped * adv).mean()
    value_loss = ((values - ret) ** 2).mean()
    entropy = (-(torch.exp(log_pi) * log_pi).sum(dim=-1)).mean()
    total = policy_loss + config.vf_coef * value_loss - config.entropy_coef * entropy
    if not torch.isfinite(total):
        raise FloatingPointError(
            f"non-finite PPO loss: policy={float(policy_loss)} "
            f"value={float(value_loss)} entropy={float(entropy)}"
        )
    stats = LossStats(
        policy_loss=float(policy_loss.detach()),
        value_loss=float(value_loss.detach()),
        entropy=float(entropy.detach()),
        total=float(total.detach()),
    )
    return total, stats


def ppo_loss(
    batch: LossBatch,
    backend: ScorerBackend,
    config: PPOConfig,
    policy_config: PolicyConfig,
    normalize: bool = True,
) -> LossStats:
    with torch.no_grad():
        _, stats = _ppo_total(batch, backend, config, policy_config, normalize)
    return stats


def ppo_grad(
    batch: LossBatch,
    backend: ScorerBackend,
    config: PPOConfig,
    policy_config: PolicyConfig,
    normalize: bool = True,
) -> tuple[LossStats, np.ndarray]:
    """Loss statistics plus the flat gradient of the total loss."""
    backend.zero_grad()
    total, stats = _ppo_total(batch, backend, config, policy_config, normalize)
    total.backward()
    return stats, backend.flat_grad()


def _bc_total(
    prompts: Sequence[str],
    candidates: Sequence[tuple[CandidateAction, ...]],
    labels: np.ndarray,
    backend: ScorerBackend,
) -> torch.Tensor:
    scores, _ = backend.scoring_graph(list(prompts), list(candidates))
    idx = torch.tensor(labels, dtype=torch.long)
    if backend.mode is ScoringMode.ACTION_HEADS:
        log_pi = torch.log_softmax(scores, dim=-1)
        picked = log_pi.gather(1, idx.unsqueeze(1)).squeeze(1)
    else:
        # Token-level sum: the summed token log-likelihood of the labeled action.
        picked = scores.gather(1, idx.unsqueeze(1)).squeeze(1)
    loss = -picked.mean()
    if not torch.isfinite(loss):
        raise FloatingPointError("non-finite BC loss")
    return loss


def bc_loss(
    prompts: Sequence[str],
    candidates: Sequence[tuple[CandidateAction, ...]],
    labels: np.ndarray,
    backend: ScorerBackend,
) -> float:
    with torch.no_grad():
        return float(_bc_total(prompts, candidates, labels, backend))


def bc_grad(
    prompts: Sequence[str],
    candidates: Sequence[tuple[CandidateAction, ...]],
    labels: np.ndarray,
    backend: ScorerBackend,
) -> tuple[float, np.ndarray]:
    backend.zero_grad()
    loss = _bc_total(prompts, candidates, labels, backend)
    loss.backward()
    return float(loss.detach()), backend.flat_grad()
