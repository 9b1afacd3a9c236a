"""Built-in trainable scorer backends.

Both backends mean-pool word embeddings of the prompt. The token scorer feeds
that pool, concatenated with a pool of the action tokens emitted so far, into a
two-layer perceptron over the vocabulary and reads conditional token
probabilities off its softmax. The action-heads backend replaces the token
machinery with one output logit per action. A small value head on the pooled
prompt representation estimates state value for the PPO critic.

Everything runs in float64 so finite-difference gradient checks are meaningful.
"""
from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np
import torch

from .distribution import CandidateAction, LOGPROB_FLOOR, Normalization, ScoringMode
from .vocab import Vocabulary

torch.set_num_threads(max(1, torch.get_num_threads()))

CHECKPOINT_FORMAT = "gridtext-backend"
CHECKPOINT_VERSION = 1


def log_policy_from_scores(
    scores: torch.Tensor, mode: ScoringMode, normalization: Normalization
) -> torch.Tensor:
    """Per-action log pi from a [B, A] score matrix, differentiably.

    Mirrors distribution.distribution_from_logprobs / _from_logits on tensors.
    """
    if mode is ScoringMode.ACTION_HEADS:
        return torch.log_softmax(scores, dim=-1)
    if normalization is Normalization.RENORMALIZE:
        return torch.log_softmax(scores, dim=-1)
    scaled = torch.exp(scores - scores.max(dim=-1, keepdim=True).values)
    return torch.log_softmax(scaled, dim=-1)


_ACTIVATIONS = {"tanh": torch.tanh, "relu": torch.relu}


class ScorerBackend(ABC):
    """Trainable policy/value substrate: prompts and candidates in, scores out."""

    kind: str
    mode: ScoringMode

    def __init__(self, vocab: Vocabulary, activation: str = "tanh"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.vocab = vocab
        self.activation = activation
        self._act = _ACTIVATIONS[activation]
        self._params: dict[str, torch.Tensor] = {}

    # -- parameter surface -------------------------------------------------
    def _register(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
        tensor = tensor.to(torch.float64).requires_grad_(True)
        self._params[name] = tensor
        return tensor

    def named_parameters(self) -> dict[str, torch.Tensor]:
        return dict(self._params)

    def num_parameters(self) -> int:
        return sum(t.numel() for t in self._params.values())

    def parameters(self) -> np.ndarray:
        with torch.no_grad():
            return torch.cat([t.reshape(-1) for t in self._params.values()]).numpy().copy()

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.num_parameters():
            raise ValueError(
                f"expected {self.num_parameters()} parameters, got {flat.size}"
            )
        offset = 0
        with torch.no_grad():
            for t in self._params.values():
                n = t.numel()
                t.copy_(torch.from_numpy(flat[offset : offset + n]).reshape(t.shape))
                offset += n

    def zero_grad(self) -> None:
        for t in self._params.values():
            if t.grad is not None:
                t.grad = None

    def flat_grad(self) -> np.ndarray:
        chunks = []
        for t in self._params.values():
            if t.grad is None:
                chunks.append(torch.zeros_like(t).reshape(-1))
            else:
                chunks.append(t.grad.reshape(-1))
        return torch.cat(chunks).detach().numpy().copy()

    def param_digest(self) -> str:
        return hashlib.sha256(self.parameters().tobytes()).hexdigest()

    # -- manifest / serialization ------------------------------------------
    def config(self) -> dict:
        return {}

    def manifest(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": self.kind,
            "config": self.config(),
            "shapes": {k: list(v.shape) for k, v in self._params.items()},
            "vocab_hash": self.vocab.manifest_hash(),
            "num_parameters": self.num_parameters(),
        }

    def manifest_hash(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def save(self, path) -> None:
        arrays = {f"param__{k}": v.detach().numpy() for k, v in self._params.items()}
        np.savez(
            path,
            manifest=json.dumps(self.manifest(), sort_keys=True),
            vocab=json.dumps(list(self.vocab.words), ensure_ascii=False),
            **arrays,
        )

    @staticmethod
    def load(path) -> "ScorerBackend":
        with np.load(path, allow_pickle=False) as blob:
            manifest = json.loads(str(blob["manifest"]))
            if manifest.get("format") != CHECKPOINT_FORMAT:
                raise ValueError("not a backend checkpoint")
            if manifest.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
            vocab = Vocabulary(tuple(json.loads(str(blob["vocab"]))))
            cls = _BACKEND_KINDS[manifest["kind"]]
            backend = cls(vocab=vocab, **manifest["config"])
            for name in backend._params:
                arr = blob[f"param__{name}"]
                with torch.no_grad():
                    backend._params[name].copy_(torch.from_numpy(arr))
        return backend

    def clone(self) -> "ScorerBackend":
        twin = _BACKEND_KINDS[self.kind](vocab=self.vocab, **self.config())
        twin.set_parameters(self.parameters())
        return twin

    # -- pooling helpers ----------------------------------------------------
    def _pool(self, token_lists: Sequence[Sequence[int]], table: str = "emb") -> torch.Tensor:
        """Mean of embedding rows per token list; empty lists pool to zero."""
        emb = self._params[table]
        rows = []
        for toks in token_lists:
            if toks:
                idx = torch.tensor(toks, dtype=torch.long)
                rows.append(emb.index_select(0, idx).mean(dim=0))
            else:
                rows.append(torch.zeros(emb.shape[1], dtype=torch.float64))
        return torch.stack(rows)

    def _prompt_pool(self, prompts: Sequence[str], table: str = "emb") -> torch.Tensor:
        return self._pool([self.vocab.encode(p) for p in prompts], table)

    def _value_graph(self, prompts: Sequence[str]) -> torch.Tensor:
        # The critic owns its embedding table: fitting returns on the 0..20
        # reward scale through the policy trunk wrecks the policy features.
        pool = self._prompt_pool(prompts, table="vemb")
        h = self._act(pool @ self._params["vw1"] + self._params["vb1"])
        return (h @ self._params["vw2"] + self._params["vb2"]).squeeze(-1)

    # -- scoring surface ----------------------------------------------------
    @abstractmethod
    def scoring_graph(
        self, prompts: Sequence[str], candidate_lists: Sequence[Sequence[CandidateAction]]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Differentiable ([B, A] score matrix, [B] values) for the trainers."""

    def token_logprobs(
        self, prompt: str, candidates: Sequence[CandidateAction]
    ) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} backend does not score tokens")

    def head_logits(self, prompt: str, num_actions: int) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} backend has no action heads")

    def value(self, prompt: str) -> float:
        return float(self.values([prompt])[0])

    def values(self, prompts: Sequence[str]) -> np.ndarray:
        with torch.no_grad():
            return self._value_graph(prompts).numpy()


def _init(gen: torch.Generator, *shape: int, scale: float) -> torch.Tensor:
    return torch.randn(*shape, generator=gen, dtype=torch.float64) * scale


class TokenScorerBackend(ScorerBackend):
    """Next-token scorer over the closed vocabulary (language-model stand-in)."""

    kind = "token_scorer"
    mode = ScoringMode.TOKEN_SCORING

    def __init__(
        self,
        vocab: Vocabulary,
        embed_dim: int = 64,
        hidden_dim: int = 256,
        value_embed_dim: int = 32,
        value_hidden_dim: int = 64,
        seed: int = 0,
        activation: str = "tanh",
    ):
        super().__init__(vocab, activation)
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.value_embed_dim = value_embed_dim
        self.value_hidden_dim = value_hidden_dim
        self.seed = seed
        v = len(vocab)
        g = torch.Generator().manual_seed(seed)
        self._register("emb", _init(g, v, embed_dim, scale=0.1))
        self._register("w1", _init(g, 2 * embed_dim, hidden_dim, scale=(2 * embed_dim) ** -0.5))
        self._register("b1", torch.zeros(hidden_dim))
        self._register("w2", _init(g, hidden_dim, v, scale=0.01))
        self._register("b2", torch.zeros(v))
        self._register("vemb", _init(g, v, value_embed_dim, scale=0.1))
        self._register("vw1", _init(g, value_embed_dim, value_hidden_dim, scale=value_embed_dim**-0.5))
        self._register("vb1", torch.zeros(value_hidden_dim))
        self._register("vw2", _init(g, value_hidden_dim, 1, scale=0.01))
        self._register("vb2", torch.zeros(1))

    def config(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "value_embed_dim": self.value_embed_dim,
            "value_hidden_dim": self.value_hidden_dim,
            "seed": self.seed,
            "activation": self.activation,
        }

    def _candidate_logprob_rows(
        self,
        prompt_pool: torch.Tensor,
        rows: list[tuple[int, Sequence[int], int]],
    ) -> torch.Tensor:
        """rows = (prompt index, prefix tokens, target token) -> log-prob per row."""
        prefix_pool = self._pool([prefix for _, prefix, _ in rows])
        ctx = prompt_pool[[b for b, _, _ in rows]]
        x = torch.cat([ctx, prefix_pool], dim=-1)
        h = self._act(x @ self._params["w1"] + self._params["b1"])
        logits = h @ self._params["w2"] + self._params["b2"]
        logp = torch.log_softmax(logits, dim=-1).clamp(min=LOGPROB_FLOOR)
        targets = torch.tensor([t for _, _, t in rows], dtype=torch.long)
        return logp.gather(1, targets.unsqueeze(1)).squeeze(1)

    def scoring_graph(
        self, prompts: Sequence[str], candidate_lists: Sequence[Sequence[CandidateAction]]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        widths = {len(c) for c in candidate_lists}
        if len(widths) != 1:
            raise ValueError("all samples must share one candidate count")
        num_actions = widths.pop()
        prompt_pool = self._prompt_pool(prompts)
        rows: list[tuple[int, Sequence[int], int]] = []
        owners: list[tuple[int, int]] = []
        for b, cands in enumerate(candidate_lists):
            for a, cand in enumerate(cands):
                for j, target in enumerate(cand.tokens):
                    rows.append((b, cand.tokens[:j], target))
                    owners.append((b, a))
        per_row = self._candidate_logprob_rows(prompt_pool, rows)
        matrix = torch.zeros(len(prompts), num_actions, dtype=torch.float64)
        owner_idx = torch.tensor(
            [b * num_actions + a for b, a in owners], dtype=torch.long
        )
        matrix = matrix.reshape(-1).index_add(0, owner_idx, per_row).reshape(
            len(prompts), num_actions
        )
        return matrix, self._value_graph(prompts)

    def token_logprobs(
        self, prompt: str, candidates: Sequence[CandidateAction]
    ) -> np.ndarray:
        if not candidates:
            raise ValueError("need at least one candidate")
        with torch.no_grad():
            matrix, _ = self.scoring_graph([prompt], [list(candidates)])
            return matrix[0].numpy()


class ActionHeadsBackend(ScorerBackend):
    """One output head per action instead of token scoring."""

    kind = "action_heads"
    mode = ScoringMode.ACTION_HEADS

    def __init__(
        self,
        vocab: Vocabulary,
        num_actions: int = 6,
        embed_dim: int = 64,
        hidden_dim: int = 256,
        value_embed_dim: int = 32,
        value_hidden_dim: int = 64,
        seed: int = 0,
        activation: str = "tanh",
    ):
        super().__init__(vocab, activation)
        self.num_actions = num_actions
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.value_embed_dim = value_embed_dim
        self.value_hidden_dim = value_hidden_dim
        self.seed = seed
        v = len(vocab)
        g = torch.Generator().manual_seed(seed)
        self._register("emb", _init(g, v, embed_dim, scale=0.1))
        self._register("w1", _init(g, embed_dim, hidden_dim, scale=embed_dim**-0.5))
        self._register("b1", torch.zeros(hidden_dim))
        self._register("w2", torch.zeros(hidden_dim, num_actions))
        self._register("b2", torch.zeros(num_actions))
        self._register("vemb", _init(g, v, value_embed_dim, scale=0.1))
        self._register("vw1", _init(g, value_embed_dim, value_hidden_dim, scale=value_embed_dim**-0.5))
        self._register("vb1", torch.zeros(value_hidden_dim))
        self._register("vw2", _init(g, value_hidden_dim, 1, scale=0.01))
        self._register("vb2", torch.zeros(1))

    def config(self) -> dict:
        return {
            "num_actions": self.num_actions,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "value_embed_dim": self.value_embed_dim,
            "value_hidden_dim": self.value_hidden_dim,
            "seed": self.seed,
            "activation": self.activation,
        }

    def _logits_from_pool(self, pool: torch.Tensor) -> torch.Tensor:
        h = self._act(pool @ self._params["w1"] + self._params["b1"])
        return h @ self._params["w2"] + self._params["b2"]

    def scoring_graph(
        self, prompts: Sequence[str], candidate_lists: Sequence[Sequence[CandidateAction]]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        widths = {len(c) for c in candidate_lists}
        if widths != {self.num_actions}:
            raise ValueError(
                f"backend has {self.num_actions} heads but got candidate counts {sorted(widths)}"
            )
        return self._logits_from_pool(self._prompt_pool(prompts)), self._value_graph(prompts)

    def head_logits(self, prompt: str, num_actions: int) -> np.ndarray:
        if num_actions != self.num_actions:
            raise ValueError(
                f"backend has {self.num_actions} heads, asked to score {num_actions}"
            )
        with torch.no_grad():
            return self._logits_from_pool(self._prompt_pool([prompt]))[0].numpy()


_BACKEND_KINDS = {
    TokenScorerBackend.kind: TokenScorerBackend,
    ActionHeadsBackend.kind: ActionHeadsBackend,
}


def builtin_token_scorer(vocab: Vocabulary, **dims) -> TokenScorerBackend:
    return TokenScorerBackend(vocab, **dims)


def builtin_action_heads(vocab: Vocabulary, num_actions: int, **dims) -> ActionHeadsBackend:
    return ActionHeadsBackend(vocab, num_actions=num_actions, **dims)
