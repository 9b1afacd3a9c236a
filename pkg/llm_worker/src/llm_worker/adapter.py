"""Language-model adapter: candidate scoring, state values, PPO shard updates.

score() computes the summed conditional log-probability of each candidate's
tokens given the prompt with one teacher-forced forward pass per candidate.
The value head is an MLP (default: three hidden layers of 1024 sigmoid units)
reading the final decoder representation at the last prompt position.

Everything runs in float64 on CPU so scores and gradients are reproducible and
comparable against high-precision oracles.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

LOGPROB_FLOOR = -80.0


class PromptTooLongError(ValueError):
    pass


class ValueHead(torch.nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int = 1024, hidden_layers: int = 3):
        super().__init__()
        layers: list[torch.nn.Module] = []
        width = input_dim
        for _ in range(hidden_layers):
            layers.append(torch.nn.Linear(width, hidden_dim))
            layers.append(torch.nn.Sigmoid())
            width = hidden_dim
        layers.append(torch.nn.Linear(width, 1))
        self.mlp = torch.nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.mlp(x).squeeze(-1)


class LMAdapter:
    def __init__(
        self,
        model_dir: str | Path,
        value_hidden_dim: int = 1024,
        value_hidden_layers: int = 3,
        seed: int = 0,
    ):
        self.model_dir = str(model_dir)
        self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        self.model = AutoModelForCausalLM.from_pretrained(model_dir).double()
        self.model.eval()
        torch.manual_seed(seed)
        self.value_head = ValueHead(
            self.model.config.hidden_size, value_hidden_dim, value_hidden_layers
        ).double()
        self.max_positions = int(getattr(self.model.config, "n_positions", 1024))

    # -- parameter surface ----------------------------------------------------
    def named_parameters(self) -> list[tuple[str, torch.nn.Parameter]]:
        params = [(f"model.{n}", p) for n, p in self.model.named_parameters()]
        params += [(f"value.{n}", p) for n, p in self.value_head.named_parameters()]
        return params

    def num_parameters(self) -> int:
        return sum(p.numel() for _, p in self.named_parameters())

    def parameters_flat(self) -> np.ndarray:
        with torch.no_grad():
            return (
                torch.cat([p.reshape(-1) for _, p in self.named_parameters()])
                .numpy()
                .copy()
            )

    def set_parameters_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.num_parameters():
            raise ValueError(f"expected {self.num_parameters()} parameters, got {flat.size}")
        offset = 0
        with torch.no_grad():
            for _, p in self.named_parameters():
                n = p.numel()
                p.copy_(torch.from_numpy(flat[offset : offset + n]).reshape(p.shape))
                offset += n

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None

    def flat_grad(self) -> np.ndarray:
        chunks = []
        for _, p in self.named_parameters():
            if p.grad is None:
                chunks.append(torch.zeros_like(p).reshape(-1))
            else:
                chunks.append(p.grad.reshape(-1))
        return torch.cat(chunks).detach().numpy().copy()

    def param_digest(self) -> str:
        return hashlib.sha256(self.parameters_flat().tobytes()).hexdigest()

    def manifest(self) -> dict:
        return {
            "kind": "causal_lm",
            "model_dir": Path(self.model_dir).name,
            "hidden_size": int(self.model.config.hidden_size),
            "vocab_size": int(self.model.config.vocab_size),
            "num_parameters": self.num_parameters(),
        }

    def manifest_hash(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    # -- encoding --------------------------------------------------------------
    def encode(self, text: str) -> list[int]:
        return self.tokenizer.encode(text, add_special_tokens=False)

    def _check_length(self, n_tokens: int) -> None:
        if n_tokens > self.max_positions:
            raise PromptTooLongError(
                f"sequence of {n_tokens} tokens exceeds the model context "
                f"({self.max_positions})"
            )

    # -- scoring ---------------------------------------------------------------
    def _candidate_logprob(self, prompt_ids: list[int], cand_ids: list[int]) -> torch.Tensor:
        """Differentiable summed log P(candidate tokens | prompt, prefix)."""
        if not cand_ids:
            raise ValueError("candidate tokenized to nothing")
        ids = prompt_ids + cand_ids
        self._check_length(len(ids))
        input_ids = torch.tensor([ids], dtype=torch.long)
        logits = self.model(input_ids).logits[0]
        # logits at position i predict token i+1
        rows = logits[len(prompt_ids) - 1 : len(ids) - 1]
        logp = torch.log_softmax(rows, dim=-1).clamp(min=LOGPROB_FLOOR)
        targets = torch.tensor(cand_ids, dtype=torch.long)
        return logp.gather(1, targets.unsqueeze(1)).sum()

    def score(self, prompt: str, candidates: Sequence[str]) -> np.ndarray:
        """Per-candidate summed token log-probs given the prompt."""
        with torch.no_grad():
            return self.score_graph(prompt, candidates).numpy()

    def score_graph(self, prompt: str, candidates: Sequence[str]) -> torch.Tensor:
        prompt_ids = self.encode(prompt)
        if not prompt_ids:
            raise ValueError("empty prompt")
        return torch.stack(
            [self._candidate_logprob(prompt_ids, self.encode(c)) for c in candidates]
        )

    # -- values ------------------------------------------------------------------
    def value_graph(self, prompt: str) -> torch.Tensor:
        prompt_ids = self.encode(prompt)
        self._check_length(len(prompt_ids))
        input_ids = torch.tensor([prompt_ids], dtype=torch.long)
        out = self.model(input_ids, output_hidden_states=True)
        last_hidden = out.hidden_states[-1][0, -1]
        return self.value_head(last_hidden)

    def value(self, prompt: str) -> float:
        with torch.no_grad():
            return float(self.value_graph(prompt))

    def values(self, prompts: Sequence[str]) -> np.ndarray:
        return np.array([self.value(p) for p in prompts])
