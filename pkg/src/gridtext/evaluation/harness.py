"""Success-rate evaluation over seeded episode batches."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

from ..env.types import EpisodeConfig, TaskFamily
from ..policy.vocab import Vocabulary
from ..rollout import Agent, EpisodeRunner
from ..text.lexicon import Lexicon
from .metrics import ci_over_seeds


@dataclass(frozen=True)
class EvalReport:
    overall_sr: float
    per_task_sr: dict[str, float]
    per_seed_sr: dict[int, float]
    episodes: int
    seeds: tuple[int, ...]
    ci_half_width: Optional[float]

    def to_dict(self) -> dict:
        return {
            "overall_sr": self.overall_sr,
            "per_task_sr": dict(self.per_task_sr),
            "per_seed_sr": {str(k): v for k, v in self.per_seed_sr.items()},
            "episodes": self.episodes,
            "seeds": list(self.seeds),
            "ci_half_width": self.ci_half_width,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            json.dump(self.to_dict(), fp, indent=2, sort_keys=True)


def run_eval(
    agent: Agent,
    env_config: EpisodeConfig,
    n_episodes: int,
    seeds: Sequence[int],
    lexicon: Optional[Lexicon] = None,
    vocab: Optional[Vocabulary] = None,
    family_filter: Optional[set[TaskFamily]] = None,
) -> EvalReport:
    """n_episodes per seed; per-seed success rates are kept for the CI."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if not seeds:
        raise ValueError("need at least one seed")
    runner = EpisodeRunner(env_config, lexicon, vocab)
    per_seed: dict[int, float] = {}
    task_counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    total_successes = 0
    for seed in seeds:
        results = runner.run_many(agent, seed, n_episodes, family_filter)
        successes = sum(r.success for r in results)
        per_seed[seed] = successes / n_episodes
        total_successes += successes
        for r in results:
            bucket = task_counts[r.family.value]
            bucket[0] += int(r.success)
            bucket[1] += 1
    half_width = ci_over_seeds(list(per_seed.values()))[1] if len(seeds) >= 2 else None
    return EvalReport(
        overall_sr=total_successes / (n_episodes * len(seeds)),
        per_task_sr={k: s / n for k, (s, n) in sorted(task_counts.items())},
        per_seed_sr=per_seed,
        episodes=n_episodes * len(seeds),
        seeds=tuple(seeds),
        ci_half_width=half_width,
    )
