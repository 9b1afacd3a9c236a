from __future__ import annotations

import numpy as np
import pytest

from gridtext.env.types import (
    Color,
    Direction,
    DoorState,
    GridState,
    ObjectKind,
    Position,
    WorldObject,
)
from gridtext.policy.backends import ActionHeadsBackend, TokenScorerBackend
from gridtext.policy.vocab import build_vocabulary
from gridtext.text.lexicon import default_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def vocab(lexicon):
    return build_vocabulary(lexicon)


@pytest.fixture()
def tiny_token_backend(vocab):
    return TokenScorerBackend(vocab, embed_dim=8, hidden_dim=16, value_hidden_dim=8, seed=1)


@pytest.fixture()
def tiny_heads_backend(vocab):
    return ActionHeadsBackend(
        vocab, num_actions=6, embed_dim=8, hidden_dim=16, value_hidden_dim=8, seed=1
    )


def make_state(
    objects,
    agent_pos=Position(4, 4),
    agent_dir=Direction.NORTH,
    carried=None,
    room_size=8,
    step_count=0,
):
    return GridState(
        room_size=room_size,
        objects=tuple(objects),
        agent_pos=agent_pos,
        agent_dir=agent_dir,
        carried=carried,
        step_count=step_count,
        rng_seed=0,
    )


def ball(color, x, y):
    return WorldObject(ObjectKind.BALL, color, Position(x, y))


def box(color, x, y):
    return WorldObject(ObjectKind.BOX, color, Position(x, y))


def key(color, x, y):
    return WorldObject(ObjectKind.KEY, color, Position(x, y))


def door(color, x, y, state=DoorState.LOCKED):
    return WorldObject(ObjectKind.DOOR, color, Position(x, y), state)
