#!/usr/bin/env python3
"""Record golden protocol transcripts from a fixed-seed in-process worker."""
from __future__ import annotations

import json
from pathlib import Path

from gridtext.policy.backends import TokenScorerBackend
from gridtext.policy.vocab import build_vocabulary
from gridtext.service import protocol
from gridtext.service.worker import WorkerCore
from gridtext.text.lexicon import default_lexicon

OUT = Path(__file__).resolve().parents[1] / "docs" / "transcripts"

PROMPT_A = (
    "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n"
    "Goal of the agent: go to the red ball\n"
    "Obs. 0: You see a red ball 2 steps left, You see a wall 4 steps forward\n"
    "Action 0:"
)
PROMPT_B = (
    "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n"
    "Goal of the agent: pick up the green box\n"
    "Obs. 0: You see a green box 1 step forward\n"
    "Action 0:"
)
CANDIDATES = ["turn left", "turn right", "go forward", "pick up", "drop", "toggle"]


def record(core: WorkerCore, messages: list[dict]) -> list[dict]:
    rows = []
    for message in messages:
        reply = core.handle(message)
        rows.append({"dir": "request", "frame": message})
        rows.append({"dir": "response", "frame": reply})
    return rows


def write(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for row in rows:
            fp.write(protocol.canonical_json(row).decode("utf-8") + "\n")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    vocab = build_vocabulary(default_lexicon())
    backend = TokenScorerBackend(
        vocab, embed_dim=8, hidden_dim=16, value_hidden_dim=8, seed=1234
    )
    core = WorkerCore(backend)

    scoring = [
        protocol.request("s-0", protocol.HELLO),
        protocol.request(
            "s-1",
            protocol.SCORE,
            {
                "prompts": [PROMPT_A, PROMPT_B],
                "candidates": [CANDIDATES, CANDIDATES],
                "with_values": True,
            },
        ),
        protocol.request(
            "s-2",
            protocol.SCORE,
            {
                "prompts": [PROMPT_A],
                "candidates": [CANDIDATES[2:4]],
                "indices": [[2, 3]],
                "total_candidates": 6,
            },
        ),
        protocol.request("s-3", protocol.VALUE, {"prompts": [PROMPT_B]}),
        protocol.request("s-4", protocol.PARAM_DIGEST),
        protocol.request("s-5", protocol.SHUTDOWN),
    ]
    write(OUT / "scoring_session.jsonl", record(core, scoring))

    shard = {
        "prompts": [PROMPT_A, PROMPT_B],
        "candidates": [CANDIDATES, CANDIDATES],
        "action_indices": [0, 2],
        "old_logprobs": protocol.encode_array([-1.7917594692280550, -1.7917594692280550]),
        "advantages": protocol.encode_array([1.25, -0.5]),
        "returns": protocol.encode_array([18.0, 0.5]),
    }
    update = [
        protocol.request("u-0", protocol.HELLO),
        protocol.request(
            "u-1",
            protocol.UPDATE_GRAD,
            {
                "shard": shard,
                "loss": {
                    "clip_eps": 0.2,
                    "vf_coef": 0.5,
                    "entropy_coef": 0.01,
                    "advantage_normalization": False,
                    "normalization": "max_temperature",
                    "mode": "token_scoring",
                },
            },
        ),
        protocol.request("u-2", protocol.PARAM_DIGEST),
    ]
    core2 = WorkerCore(backend.clone())
    write(OUT / "update_session.jsonl", record(core2, update))
    print(f"wrote transcripts to {OUT}")


if __name__ == "__main__":
    main()
