"""Rollout storage with per-environment ordering preserved for GAE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    prompt: str
    action_index: int
    old_logprob: float
    value_estimate: float
    reward: float
    done: bool
    success: bool
    # Value of the next observation when the episode hit its step limit
    # without terminating; lets GAE bootstrap across time-limit truncation.
    truncation_value: float = 0.0


class RolloutBuffer:
    """Fixed-capacity transition store; GAE runs over per-env contiguous segments."""

    def __init__(self, num_envs: int, steps_per_env: int):
        self.num_envs = num_envs
        self.steps_per_env = steps_per_env
        self.segments: list[list[Transition]] = [[] for _ in range(num_envs)]

    @property
    def capacity(self) -> int:
        return self.num_envs * self.steps_per_env

    def __len__(self) -> int:
        return sum(len(s) for s in self.segments)

    def add(self, env_index: int, transition: Transition) -> None:
        if len(self.segments[env_index]) >= self.steps_per_env:
            raise ValueError("segment full; buffer must be cleared between updates")
        self.segments[env_index].append(transition)

    def full(self) -> bool:
        return len(self) == self.capacity

    def clear(self) -> None:
        for segment in self.segments:
            segment.clear()

    def segment_arrays(self, env_index: int) -> dict[str, np.ndarray]:
        seg = self.segments[env_index]
        return {
            "rewards": np.array([t.reward for t in seg], dtype=np.float64),
            "values": np.array([t.value_estimate for t in seg], dtype=np.float64),
            "dones": np.array([t.done for t in seg], dtype=bool),
            "truncation_values": np.array(
                [t.truncation_value for t in seg], dtype=np.float64
            ),
        }
