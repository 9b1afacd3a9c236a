"""Online PPO: synchronized vector collection, GAE, clipped minibatch updates.

The trainer talks to the policy through two narrow clients so the same loop
runs against a local backend or a pool of scoring workers: a score client
(batched score matrix + values) and an update client (one applied minibatch
update). Checkpoint/resume restores the full sampling state, so a resumed run
reproduces the uninterrupted one bit for bit.
"""
from __future__ import annotations

import pickle
from dataclasses import dataclass, replace
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
import torch

from ..env.dynamics import step
from ..env.generate import generate_episode, mix_seed
from ..env.types import EpisodeConfig, ProgressFlags
from ..policy.backends import ScorerBackend
from ..policy.distribution import (
    PolicyConfig,
    ScoringMode,
    distribution_from_logits,
    distribution_from_logprobs,
)
from ..prompting import HistoryBuffer, build_prompt
from ..text.describe import describe, goal_text
from ..text.lexicon import Lexicon, build_actions, default_lexicon
from ..policy.distribution import make_candidates
from .buffer import RolloutBuffer, Transition
from .gae import compute_gae
from .losses import (
    LossBatch,
    LossStats,
    PPOConfig,
    normalize_advantages,
    ppo_grad,
)
from .optim import Adam, AdamConfig, clip_grad_norm

_SAMPLE_TAG = 0xA5A17
_SHUFFLE_TAG = 0x5B0FF


class ScoreClient(Protocol):
    def score_matrix(
        self, prompts: Sequence[str], candidate_lists: Sequence
    ) -> tuple[np.ndarray, np.ndarray]: ...

    def values(self, prompts: Sequence[str]) -> np.ndarray: ...


class UpdateClient(Protocol):
    def update(self, batch: LossBatch) -> LossStats: ...


class LocalScoreClient:
    def __init__(self, backend: ScorerBackend):
        self.backend = backend

    def score_matrix(self, prompts, candidate_lists):
        with torch.no_grad():
            scores, values = self.backend.scoring_graph(list(prompts), list(candidate_lists))
            return scores.numpy(), values.numpy()

    def values(self, prompts):
        return self.backend.values(list(prompts))


class LocalUpdateClient:
    """Gradient, clip, Adam step applied directly to one backend."""

    def __init__(
        self,
        backend: ScorerBackend,
        ppo_config: PPOConfig,
        policy_config: PolicyConfig,
        adam_config: AdamConfig = AdamConfig(),
    ):
        self.backend = backend
        self.ppo_config = ppo_config
        self.policy_config = policy_config
        self.adam = Adam(backend.num_parameters(), ppo_config.lr, adam_config)

    def update(self, batch: LossBatch) -> LossStats:
        cfg = self.ppo_config
        if cfg.advantage_normalization:
            batch = replace_advantages(batch, normalize_advantages(batch.advantages))
        stats, grad = ppo_grad(
            batch, self.backend, cfg, self.policy_config, normalize=False
        )
        grad, _ = clip_grad_norm(grad, cfg.max_grad_norm)
        self.backend.set_parameters(self.adam.step(self.backend.parameters(), grad))
        return stats


def replace_advantages(batch: LossBatch, advantages: np.ndarray) -> LossBatch:
    return LossBatch(
        prompts=batch.prompts,
        candidates=batch.candidates,
        action_indices=batch.action_indices,
        old_logprobs=batch.old_logprobs,
        advantages=advantages,
        returns=batch.returns,
    )


@dataclass
class _EnvSlot:
    state: object
    task: object
    progress: ProgressFlags
    history: HistoryBuffer
    goal: str
    episode_seed: int


class PPOTrainer:
    def __init__(
        self,
        env_config: EpisodeConfig,
        backend: ScorerBackend,
        ppo_config: PPOConfig,
        policy_config: PolicyConfig,
        lexicon: Optional[Lexicon] = None,
        master_seed: int = 0,
        score_client: Optional[ScoreClient] = None,
        update_client: Optional[UpdateClient] = None,
        adam_config: AdamConfig = AdamConfig(),
        update_hook: Optional[Callable[[int, ScorerBackend], dict]] = None,
        metrics_writer: Optional[Callable[[dict], None]] = None,
    ):
        self.env_config = env_config
        self.backend = backend
        self.ppo_config = ppo_config
        self.policy_config = policy_config
        self.lexicon = lexicon if lexicon is not None else default_lexicon()
        self.master_seed = master_seed
        self.actions = build_actions(self.lexicon, env_config.action_space)
        self.candidates = make_candidates(self.actions, backend.vocab)
        self.score_client = score_client or LocalScoreClient(backend)
        # advantages are normalized once over the whole collected batch, so the
        # per-minibatch client path must not renormalize slices of it
        client_config = replace(ppo_config, advantage_normalization=False)
        self.update_client = update_client or LocalUpdateClient(
            backend, client_config, policy_config, adam_config
        )
        self.update_hook = update_hook
        self.metrics_writer = metrics_writer

        self.num_envs = ppo_config.num_envs
        self.steps_per_env = ppo_config.steps_per_update // self.num_envs
        self.episode_counters = [0] * self.num_envs
        self.slots = [self._fresh_slot(i) for i in range(self.num_envs)]
        self.sample_rng = np.random.default_rng(mix_seed(master_seed, _SAMPLE_TAG))
        self.shuffle_rng = np.random.default_rng(mix_seed(master_seed, _SHUFFLE_TAG))
        self.update_index = 0
        self.env_steps = 0

    # -- episode plumbing ----------------------------------------------------
    def _fresh_slot(self, env_index: int) -> _EnvSlot:
        seed = mix_seed(self.master_seed, env_index, self.episode_counters[env_index])
        self.episode_counters[env_index] += 1
        config = replace(self.env_config, seed=seed)
        state, task = generate_episode(config)
        history = HistoryBuffer()
        history.push_observation(describe(state, self.lexicon))
        return _EnvSlot(
            state=state,
            task=task,
            progress=ProgressFlags(),
            history=history,
            goal=goal_text(task, self.lexicon),
            episode_seed=seed,
        )

    def _prompts(self) -> list[str]:
        return [
            build_prompt(self.actions, slot.goal, slot.history).text
            for slot in self.slots
        ]

    def _distribution(self, score_row: np.ndarray):
        if self.backend.mode is ScoringMode.ACTION_HEADS:
            return distribution_from_logits(score_row)
        return distribution_from_logprobs(score_row, self.policy_config.normalization)

    # -- collection ------------------------------------------------------------
    def collect(self) -> tuple[RolloutBuffer, list[str], dict]:
        buffer = RolloutBuffer(self.num_envs, self.steps_per_env)
        prompts_store: list[list[str]] = [[] for _ in range(self.num_envs)]
        truncated_at: dict[int, tuple[int, str]] = {}
        episodes = 0
        successes = 0
        reward_sum = 0.0
        cand_lists = [self.candidates] * self.num_envs
        for _ in range(self.steps_per_env):
            prompts = self._prompts()
            scores, values = self.score_client.score_matrix(prompts, cand_lists)
            for i, slot in enumerate(self.slots):
                dist = self._distribution(scores[i])
                action_index = int(
                    self.sample_rng.choice(len(dist.probs), p=dist.probs)
                )
                config = replace(self.env_config, seed=slot.episode_seed)
                new_state, outcome, progress = step(
                    slot.state, slot.task, self.actions[action_index], config, slot.progress
                )
                buffer.add(
                    i,
                    Transition(
                        prompt=prompts[i],
                        action_index=action_index,
                        old_logprob=float(dist.logprobs[action_index]),
                        value_estimate=float(values[i]),
                        reward=outcome.reward,
                        done=outcome.done,
                        success=outcome.success,
                    ),
                )
                prompts_store[i].append(prompts[i])
                reward_sum += outcome.reward
                self.env_steps += 1
                if outcome.done:
                    episodes += 1
                    successes += int(outcome.success)
                    if not outcome.success:
                        # Time-limit truncation: record V(next obs) so GAE can
                        # bootstrap instead of treating the cut as terminal.
                        slot.history.push_action(self.actions[action_index].display)
                        slot.history.push_observation(describe(new_state, self.lexicon))
                        final_prompt = build_prompt(
                            self.actions, slot.goal, slot.history
                        ).text
                        truncated_at[i] = (len(buffer.segments[i]) - 1, final_prompt)
                    self.slots[i] = self._fresh_slot(i)
                else:
                    slot.state = new_state
                    slot.progress = progress
                    slot.history.push_action(self.actions[action_index].display)
                    slot.history.push_observation(describe(new_state, self.lexicon))
        if truncated_at:
            order = sorted(truncated_at)
            final_values = self.score_client.values(
                [truncated_at[i][1] for i in order]
            )
            for i, v in zip(order, final_values):
                step_idx, _ = truncated_at[i]
                t = buffer.segments[i][step_idx]
                buffer.segments[i][step_idx] = Transition(
                    prompt=t.prompt,
                    action_index=t.action_index,
                    old_logprob=t.old_logprob,
                    value_estimate=t.value_estimate,
                    reward=t.reward,
                    done=t.done,
                    success=t.success,
                    truncation_value=float(v),
                )
        flat_prompts = [p for seg in prompts_store for p in seg]
        stats = {
            "episodes": episodes,
            "successes": successes,
            "success_rate": successes / episodes if episodes else 0.0,
            "mean_reward": reward_sum / buffer.capacity,
        }
        return buffer, flat_prompts, stats

    def _advantages(self, buffer: RolloutBuffer) -> tuple[np.ndarray, np.ndarray]:
        # Bootstrap with the value of each env's next observation when the
        # segment did not end an episode.
        next_prompts = self._prompts()
        _, boot_values = self.score_client.score_matrix(
            next_prompts, [self.candidates] * self.num_envs
        )
        advantages = []
        returns = []
        for i in range(self.num_envs):
            arrays = buffer.segment_arrays(i)
            rewards = (
                arrays["rewards"]
                + self.ppo_config.gamma * arrays["truncation_values"]
            )
            adv, ret = compute_gae(
                rewards,
                arrays["values"],
                arrays["dones"],
                bootstrap_value=float(boot_values[i]),
                gamma=self.ppo_config.gamma,
                lam=self.ppo_config.gae_lambda,
            )
            advantages.append(adv)
            returns.append(ret)
        return np.concatenate(advantages), np.concatenate(returns)

    # -- updates -----------------------------------------------------------------
    def update(self, buffer: RolloutBuffer, prompts: list[str]) -> list[LossStats]:
        advantages, returns = self._advantages(buffer)
        if self.ppo_config.advantage_normalization:
            advantages = normalize_advantages(advantages)
        transitions = [t for seg in buffer.segments for t in seg]
        batch = LossBatch(
            prompts=prompts,
            candidates=[self.candidates] * len(transitions),
            action_indices=np.array([t.action_index for t in transitions]),
            old_logprobs=np.array([t.old_logprob for t in transitions]),
            advantages=advantages,
            returns=returns,
        )
        stats = []
        n = len(batch)
        for _ in range(self.ppo_config.epochs):
            order = self.shuffle_rng.permutation(n)
            for start in range(0, n, self.ppo_config.batch_size):
                idx = order[start : start + self.ppo_config.batch_size]
                stats.append(self.update_client.update(batch.slice(idx)))
        return stats

    def run_update(self) -> dict:
        buffer, prompts, collect_stats = self.collect()
        loss_stats = self.update(buffer, prompts)
        self.update_index += 1
        record = {
            "update": self.update_index,
            "env_steps": self.env_steps,
            **collect_stats,
            "policy_loss": float(np.mean([s.policy_loss for s in loss_stats])),
            "value_loss": float(np.mean([s.value_loss for s in loss_stats])),
            "entropy": float(np.mean([s.entropy for s in loss_stats])),
            "total_loss": float(np.mean([s.total for s in loss_stats])),
        }
        if self.update_hook is not None:
            record.update(self.update_hook(self.update_index, self.backend))
        if self.metrics_writer is not None:
            self.metrics_writer(record)
        return record

    def run(self, total_steps: int) -> list[dict]:
        records = []
        while self.env_steps < total_steps:
            records.append(self.run_update())
        return records

    # -- checkpoint / resume -------------------------------------------------
    def state_dict(self) -> dict:
        state = {
            "update_index": self.update_index,
            "env_steps": self.env_steps,
            "episode_counters": list(self.episode_counters),
            "slots": pickle.dumps(self.slots),
            "sample_rng": self.sample_rng.bit_generator.state,
            "shuffle_rng": self.shuffle_rng.bit_generator.state,
            "backend_params": self.backend.parameters(),
        }
        if isinstance(self.update_client, LocalUpdateClient):
            state["adam"] = self.update_client.adam.state_dict()
        return state

    def load_state_dict(self, state: dict) -> None:
        self.update_index = state["update_index"]
        self.env_steps = state["env_steps"]
        self.episode_counters = list(state["episode_counters"])
        self.slots = pickle.loads(state["slots"])
        self.sample_rng.bit_generator.state = state["sample_rng"]
        self.shuffle_rng.bit_generator.state = state["shuffle_rng"]
        self.backend.set_parameters(state["backend_params"])
        if "adam" in state and isinstance(self.update_client, LocalUpdateClient):
            self.update_client.adam = Adam.from_state(state["adam"])


def train_ppo(
    env_config: EpisodeConfig,
    backend: ScorerBackend,
    ppo_config: PPOConfig,
    total_steps: int,
    policy_config: PolicyConfig = PolicyConfig(),
    **kwargs,
) -> list[dict]:
    """Collect/update until total_steps environment steps; returns the metrics stream."""
    trainer = PPOTrainer(env_config, backend, ppo_config, policy_config, **kwargs)
    return trainer.run(total_steps)
