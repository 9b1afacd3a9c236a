from __future__ import annotations

import pytest

from llm_worker.adapter import LMAdapter
from llm_worker.checkpoint import build_tiny_checkpoint


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny-model")
    build_tiny_checkpoint(out, seed=0)
    return out


@pytest.fixture(scope="session")
def adapter(model_dir):
    # small value head keeps the CPU suite quick; the 3x1024 sigmoid stack is
    # the serving default
    return LMAdapter(model_dir, value_hidden_dim=64, value_hidden_layers=3, seed=0)


PROMPT = (
    "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n"
    "Goal of the agent: go to the red ball\n"
    "Obs. 0: You see a red ball 2 steps left, You see a wall 4 steps forward\n"
    "Action 0:"
)

CANDIDATES = ["turn left", "turn right", "go forward", "pick up", "drop", "toggle"]
