"""Action scoring: distribution math, tokenization, and trainable backends."""

from .backends import (
    ActionHeadsBackend,
    ScorerBackend,
    TokenScorerBackend,
    builtin_action_heads,
    builtin_token_scorer,
    log_policy_from_scores,
)
from .distribution import (
    ActionDistribution,
    CandidateAction,
    LOGPROB_FLOOR,
    Normalization,
    PolicyConfig,
    ScoringMode,
    action_distribution,
    action_logprob,
    distribution_from_logits,
    distribution_from_logprobs,
    make_candidates,
    sample_action,
)
from .vocab import UNK_ID, UNK_TOKEN, Vocabulary, build_vocabulary, tokenize

__all__ = [
    "ActionDistribution",
    "ActionHeadsBackend",
    "CandidateAction",
    "LOGPROB_FLOOR",
    "Normalization",
    "PolicyConfig",
    "ScorerBackend",
    "ScoringMode",
    "TokenScorerBackend",
    "UNK_ID",
    "UNK_TOKEN",
    "Vocabulary",
    "action_distribution",
    "action_logprob",
    "build_vocabulary",
    "builtin_action_heads",
    "builtin_token_scorer",
    "distribution_from_logits",
    "distribution_from_logprobs",
    "log_policy_from_scores",
    "make_candidates",
    "sample_action",
    "tokenize",
]
