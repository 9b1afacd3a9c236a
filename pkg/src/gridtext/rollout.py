"""Episode execution shared by evaluation, data collection, and debugging.

An agent picks an action index given a StepView; the runner owns episode
generation, textualization, prompting, and history bookkeeping. Agents that act
from full state (the planner bot, random play) can skip prompt construction
entirely, which keeps large evaluation sweeps fast.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

from .env.bot import oracle_bot_action
from .env.dynamics import step
from .env.generate import generate_episode, mix_seed
from .env.types import (
    EpisodeConfig,
    GridState,
    ProgressFlags,
    StepOutcome,
    TaskFamily,
    TaskSpec,
    TextAction,
)
from .policy.backends import ScorerBackend
from .policy.distribution import (
    CandidateAction,
    PolicyConfig,
    action_distribution,
    make_candidates,
    sample_action,
)
from .policy.vocab import Vocabulary
from .prompting import HistoryBuffer, Prompt, build_prompt
from .text.describe import describe, goal_text
from .text.lexicon import Lexicon, build_actions, default_lexicon


@dataclass
class StepView:
    """Everything an agent may look at when choosing an action."""

    state: GridState
    task: TaskSpec
    progress: ProgressFlags
    config: EpisodeConfig
    actions: tuple[TextAction, ...]
    candidates: Optional[tuple[CandidateAction, ...]]
    prompt: Optional[Prompt]


class Agent(Protocol):
    needs_prompt: bool

    def act(self, view: StepView) -> int: ...


class RandomAgent:
    """Uniform over the action list."""

    needs_prompt = False

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, view: StepView) -> int:
        return int(self.rng.integers(len(view.actions)))


class BotAgent:
    """Wraps the shortest-path planner; acts from full state."""

    needs_prompt = False

    def act(self, view: StepView) -> int:
        action = oracle_bot_action(
            view.state, view.task, view.progress, view.config, view.actions
        )
        return view.actions.index(action)


class PolicyAgent:
    """Scores candidates with a backend and samples (or argmaxes) the result."""

    needs_prompt = True

    def __init__(
        self,
        backend: ScorerBackend,
        policy_config: PolicyConfig,
        rng: np.random.Generator,
        greedy: bool = False,
    ):
        self.backend = backend
        self.policy_config = policy_config
        self.rng = rng
        self.greedy = greedy

    def act(self, view: StepView) -> int:
        dist = action_distribution(
            self.backend, view.prompt.text, view.candidates, self.policy_config
        )
        if self.greedy:
            return dist.argmax()
        return sample_action(dist, self.rng)


@dataclass(frozen=True)
class EpisodeResult:
    seed: int
    family: TaskFamily
    success: bool
    steps: int
    total_reward: float


OnStep = Callable[[StepView, int, StepOutcome], None]


class EpisodeRunner:
    def __init__(
        self,
        env_config: EpisodeConfig,
        lexicon: Optional[Lexicon] = None,
        vocab: Optional[Vocabulary] = None,
    ):
        self.env_config = env_config
        self.lexicon = lexicon if lexicon is not None else default_lexicon()
        self.actions = build_actions(self.lexicon, env_config.action_space)
        self.vocab = vocab
        self.candidates = (
            make_candidates(self.actions, vocab) if vocab is not None else None
        )

    def run_episode(
        self,
        agent: Agent,
        seed: int,
        family_filter: Optional[set[TaskFamily]] = None,
        on_step: Optional[OnStep] = None,
    ) -> EpisodeResult:
        from dataclasses import replace

        config = replace(self.env_config, seed=seed)
        state, task = generate_episode(config, family_filter)
        progress = ProgressFlags()
        build_prompts = agent.needs_prompt or on_step is not None
        if build_prompts and self.candidates is None:
            raise ValueError("runner needs a vocabulary to build prompts")
        goal = goal_text(task, self.lexicon) if build_prompts else ""
        history = HistoryBuffer()
        if build_prompts:
            history.push_observation(describe(state, self.lexicon))
        total_reward = 0.0
        while True:
            prompt = (
                build_prompt(self.actions, goal, history) if build_prompts else None
            )
            view = StepView(
                state=state,
                task=task,
                progress=progress,
                config=config,
                actions=self.actions,
                candidates=self.candidates,
                prompt=prompt,
            )
            index = agent.act(view)
            state, outcome, progress = step(
                state, task, self.actions[index], config, progress
            )
            total_reward += outcome.reward
            if on_step is not None:
                on_step(view, index, outcome)
            if outcome.done:
                return EpisodeResult(
                    seed=seed,
                    family=task.family,
                    success=outcome.success,
                    steps=outcome.steps_used,
                    total_reward=total_reward,
                )
            if build_prompts:
                history.push_action(self.actions[index].display)
                history.push_observation(describe(state, self.lexicon))

    def run_many(
        self,
        agent: Agent,
        master_seed: int,
        n_episodes: int,
        family_filter: Optional[set[TaskFamily]] = None,
        on_step: Optional[OnStep] = None,
    ) -> list[EpisodeResult]:
        return [
            self.run_episode(
                agent, mix_seed(master_seed, k), family_filter, on_step
            )
            for k in range(n_episodes)
        ]
