"""Online PPO and offline behavioral cloning over any scorer backend."""

from .bc import BCDataset, BCRecord, collect_bc_dataset, evaluate_bc_loss, train_bc
from .buffer import RolloutBuffer, Transition
from .gae import compute_gae
from .losses import (
    BCConfig,
    LossBatch,
    LossStats,
    PPOConfig,
    bc_grad,
    bc_loss,
    normalize_advantages,
    ppo_grad,
    ppo_loss,
)
from .optim import Adam, AdamConfig, clip_grad_norm
from .ppo import (
    LocalScoreClient,
    LocalUpdateClient,
    PPOTrainer,
    replace_advantages,
    train_ppo,
)

__all__ = [
    "Adam",
    "AdamConfig",
    "BCConfig",
    "BCDataset",
    "BCRecord",
    "LocalScoreClient",
    "LocalUpdateClient",
    "LossBatch",
    "LossStats",
    "PPOConfig",
    "PPOTrainer",
    "RolloutBuffer",
    "Transition",
    "bc_grad",
    "bc_loss",
    "clip_grad_norm",
    "collect_bc_dataset",
    "compute_gae",
    "evaluate_bc_loss",
    "normalize_advantages",
    "ppo_grad",
    "ppo_loss",
    "replace_advantages",
    "train_ppo",
]
