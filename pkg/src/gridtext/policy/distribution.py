"""Action-probability math: per-action token log-probs to a distribution.

Two normalization modes are supported. `renormalize` divides each action's raw
probability by their sum (a softmax over summed token log-probs). Raw action
probabilities from a large vocabulary are tiny, which makes a softmax over the
raw probabilities nearly uniform; `max_temperature` divides them by their
maximum before that softmax, computed stably in log space.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

from ..env.types import TextAction
from .vocab import Vocabulary

if TYPE_CHECKING:
    from .backends import ScorerBackend

LOGPROB_FLOOR = -80.0  # token probabilities are clamped at exp(-80) before logs
_PROB_SUM_TOL = 1e-9


class Normalization(str, Enum):
    RENORMALIZE = "renormalize"
    MAX_TEMPERATURE = "max_temperature"


class ScoringMode(str, Enum):
    TOKEN_SCORING = "token_scoring"
    ACTION_HEADS = "action_heads"


@dataclass(frozen=True)
class PolicyConfig:
    normalization: Normalization = Normalization.MAX_TEMPERATURE
    mode: ScoringMode = ScoringMode.TOKEN_SCORING


@dataclass(frozen=True)
class CandidateAction:
    display: str
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"candidate {self.display!r} tokenized to nothing")


def make_candidates(
    actions: Sequence[TextAction], vocab: Vocabulary
) -> tuple[CandidateAction, ...]:
    return tuple(CandidateAction(a.display, vocab.encode(a.display)) for a in actions)


@dataclass(frozen=True)
class ActionDistribution:
    probs: np.ndarray
    logprobs: np.ndarray
    entropy: float

    def __post_init__(self):
        total = float(self.probs.sum())
        if not np.isfinite(total) or abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def argmax(self) -> int:
        return int(np.argmax(self.probs))


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


def _finish(logprobs: np.ndarray) -> ActionDistribution:
    probs = np.exp(logprobs)
    probs = probs / probs.sum()
    safe_log = np.log(np.where(probs > 0.0, probs, 1.0))
    entropy = float(-np.sum(probs * safe_log))
    return ActionDistribution(probs=probs, logprobs=logprobs, entropy=entropy)


def distribution_from_logprobs(
    logprobs: np.ndarray, normalization: Normalization
) -> ActionDistribution:
    """Normalize per-action summed token log-probs into a distribution."""
    lp = np.asarray(logprobs, dtype=np.float64)
    if lp.size == 0:
        raise ValueError("need at least one candidate")
    if not np.any(np.isfinite(lp)):
        raise ValueError("all candidate log-probs are -inf")
    if normalization is Normalization.RENORMALIZE:
        out = lp - _logsumexp(lp)
    else:
        # tau = max raw probability; softmax over p_i / tau = exp(lp_i - lp_max)
        scaled = np.exp(lp - np.max(lp))
        out = scaled - _logsumexp(scaled)
    return _finish(out)


def distribution_from_logits(logits: np.ndarray) -> ActionDistribution:
    """Plain softmax, for action-heads backends."""
    z = np.asarray(logits, dtype=np.float64)
    return _finish(z - _logsumexp(z))


def action_logprob(
    backend: "ScorerBackend", prompt: str, candidate: CandidateAction
) -> float:
    """Summed conditional token log-prob of one action given the prompt."""
    return float(backend.token_logprobs(prompt, [candidate])[0])


def action_distribution(
    backend: "ScorerBackend",
    prompt: str,
    candidates: Sequence[CandidateAction],
    config: PolicyConfig,
) -> ActionDistribution:
    if not candidates:
        raise ValueError("need at least one candidate")
    if config.mode is ScoringMode.ACTION_HEADS:
        return distribution_from_logits(backend.head_logits(prompt, len(candidates)))
    lp = backend.token_logprobs(prompt, candidates)
    return distribution_from_logprobs(lp, config.normalization)


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> int:
    return int(rng.choice(len(dist.probs), p=dist.probs))
