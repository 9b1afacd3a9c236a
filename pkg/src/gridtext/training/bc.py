"""Behavioral cloning: dataset collection from a chosen source and NLL training."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..env.generate import mix_seed
from ..env.types import Effect, EpisodeConfig, TaskFamily, TextAction
from ..policy.backends import ScorerBackend
from ..policy.distribution import PolicyConfig, make_candidates
from ..rollout import Agent, BotAgent, EpisodeRunner, PolicyAgent
from ..text.lexicon import Lexicon, default_lexicon
from .losses import BCConfig, bc_grad, bc_loss
from .optim import Adam, AdamConfig, clip_grad_norm


@dataclass(frozen=True)
class BCRecord:
    prompt: str
    action_display: str


@dataclass
class BCDataset:
    records: list[BCRecord]
    action_displays: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.records)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(json.dumps({"actions": list(self.action_displays)}) + "\n")
            for r in self.records:
                fp.write(
                    json.dumps({"prompt": r.prompt, "action": r.action_display}) + "\n"
                )

    @classmethod
    def load(cls, path) -> "BCDataset":
        with open(path, encoding="utf-8") as fp:
            header = json.loads(fp.readline())
            records = [
                BCRecord(d["prompt"], d["action"])
                for d in (json.loads(line) for line in fp if line.strip())
            ]
        return cls(records, tuple(header["actions"]))


def collect_bc_dataset(
    source: Agent | str,
    env_config: EpisodeConfig,
    n: int,
    lexicon: Optional[Lexicon] = None,
    master_seed: int = 0,
    family_filter: Optional[set[TaskFamily]] = None,
    backend: Optional[ScorerBackend] = None,
    policy_config: PolicyConfig = PolicyConfig(),
) -> BCDataset:
    """Exactly n (prompt, action display) pairs from rollouts of the source.

    source may be an Agent, or one of 'oracle_bot' / 'policy' (the latter needs
    a backend; its stochasticity means the data can contain suboptimal steps).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    lexicon = lexicon if lexicon is not None else default_lexicon()
    if isinstance(source, str):
        if source == "oracle_bot":
            agent: Agent = BotAgent()
        elif source == "policy":
            if backend is None:
                raise ValueError("policy source needs a backend")
            agent = PolicyAgent(
                backend,
                policy_config,
                np.random.default_rng(mix_seed(master_seed, 0xBC0)),
            )
        else:
            raise ValueError(f"unknown source {source!r}")
    else:
        agent = source

    vocab = backend.vocab if backend is not None else None
    if vocab is None:
        from ..policy.vocab import build_vocabulary

        vocab = build_vocabulary(lexicon)
    runner = EpisodeRunner(env_config, lexicon, vocab)
    records: list[BCRecord] = []

    def on_step(view, index, outcome):
        records.append(BCRecord(view.prompt.text, view.actions[index].display))

    episode = 0
    while len(records) < n:
        runner.run_episode(
            agent, mix_seed(master_seed, episode), family_filter, on_step=on_step
        )
        episode += 1
    del records[n:]
    return BCDataset(records, tuple(a.display for a in runner.actions))


def train_bc(
    dataset: BCDataset,
    backend: ScorerBackend,
    bc_config: BCConfig,
    adam_config: AdamConfig = AdamConfig(),
    max_grad_norm: Optional[float] = None,
    master_seed: int = 0,
    metrics_writer=None,
) -> list[dict]:
    """Minimize NLL of the labeled actions; returns per-epoch metrics."""
    displays = dataset.action_displays
    display_index = {d: i for i, d in enumerate(displays)}
    unknown = {r.action_display for r in dataset.records} - set(displays)
    if unknown:
        raise ValueError(f"labels not in the action set: {sorted(unknown)}")

    candidates = make_candidates(
        [TextAction(d, Effect.NOOP) for d in displays], backend.vocab
    )
    prompts = [r.prompt for r in dataset.records]
    labels = np.array([display_index[r.action_display] for r in dataset.records])

    adam = Adam(backend.num_parameters(), bc_config.lr, adam_config)
    rng = np.random.default_rng(mix_seed(master_seed, 0xBC1))
    cand_lists = [candidates] * len(prompts)

    metrics = []
    n = len(prompts)
    for epoch in range(bc_config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, bc_config.batch_size):
            idx = order[start : start + bc_config.batch_size]
            batch_prompts = [prompts[i] for i in idx]
            batch_cands = [candidates] * len(idx)
            loss, grad = bc_grad(batch_prompts, batch_cands, labels[idx], backend)
            if max_grad_norm is not None:
                grad, _ = clip_grad_norm(grad, max_grad_norm)
            backend.set_parameters(adam.step(backend.parameters(), grad))
            losses.append(loss)
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        if metrics_writer is not None:
            metrics_writer(record)
        metrics.append(record)
    return metrics


def evaluate_bc_loss(dataset: BCDataset, backend: ScorerBackend, limit: int = 2048) -> float:
    """Mean NLL over (up to) the first `limit` records, for before/after checks."""
    displays = dataset.action_displays
    display_index = {d: i for i, d in enumerate(displays)}
    candidates = make_candidates(
        [TextAction(d, Effect.NOOP) for d in displays], backend.vocab
    )
    records = dataset.records[:limit]
    prompts = [r.prompt for r in records]
    labels = np.array([display_index[r.action_display] for r in records])
    return bc_loss(prompts, [candidates] * len(records), labels, backend)
