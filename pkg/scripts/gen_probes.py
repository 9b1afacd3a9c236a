#!/usr/bin/env python3
"""Regenerate the default probe-prompt fixtures from handcrafted states."""
from __future__ import annotations

import json
from pathlib import Path

from gridtext.env.types import (
    ActionSpace,
    Color,
    Direction,
    DoorState,
    GridState,
    ObjectKind,
    Position,
    WorldObject,
)
from gridtext.prompting import HistoryBuffer, build_prompt
from gridtext.text.describe import describe
from gridtext.text.lexicon import build_actions, default_lexicon

OUT = Path(__file__).resolve().parents[1] / "src/gridtext/evaluation/data/probes"

AGENT = Position(4, 4)  # facing north: forward = -y, right = +x


def obj(kind, color, dx, dy, door_state=None):
    return WorldObject(kind, color, Position(AGENT.x + dx, AGENT.y + dy), door_state)


def state(objects, carried=None):
    return GridState(
        room_size=8,
        objects=tuple(objects),
        agent_pos=AGENT,
        agent_dir=Direction.NORTH,
        carried=carried,
        step_count=0,
        rng_seed=0,
    )


def main() -> None:
    lexicon = default_lexicon()
    actions = build_actions(lexicon, ActionSpace.CANONICAL)
    key_in_hand = WorldObject(ObjectKind.KEY, Color.YELLOW, None)
    blue_key_in_hand = WorldObject(ObjectKind.KEY, Color.BLUE, None)
    red_key_in_hand = WorldObject(ObjectKind.KEY, Color.RED, None)

    probes = [
        ("00_goto_left", "go to the red ball", state([obj(ObjectKind.BALL, Color.RED, -2, 0)])),
        ("01_goto_right", "go to the red ball", state([obj(ObjectKind.BALL, Color.RED, 2, 0)])),
        ("02_goto_ahead", "go to the red ball", state([obj(ObjectKind.BALL, Color.RED, 0, -2)])),
        (
            "03_pickup_faced",
            "pick up the green box",
            state([obj(ObjectKind.BOX, Color.GREEN, 0, -1)]),
        ),
        (
            "04_pickup_far",
            "pick up the green box",
            state([obj(ObjectKind.BOX, Color.GREEN, 0, -3)]),
        ),
        (
            "05_put_drop",
            "put the blue key next to the purple ball",
            state([obj(ObjectKind.BALL, Color.PURPLE, 0, -1)], carried=blue_key_in_hand),
        ),
        (
            "06_unlock_toggle",
            "unlock the yellow door",
            state(
                [obj(ObjectKind.DOOR, Color.YELLOW, 0, -4, DoorState.LOCKED)],
                carried=key_in_hand,
            ),
        ),
        (
            "07_unlock_need_key",
            "unlock the yellow door",
            state(
                [
                    obj(ObjectKind.KEY, Color.YELLOW, 0, -1),
                    obj(ObjectKind.DOOR, Color.YELLOW, 0, -4, DoorState.LOCKED),
                ]
            ),
        ),
        (
            "08_then_pickup_first",
            "pick up a red key then go to the blue ball",
            state(
                [
                    obj(ObjectKind.KEY, Color.RED, 0, -1),
                    obj(ObjectKind.BALL, Color.BLUE, -2, 0),
                ]
            ),
        ),
        (
            "09_after_pickup_first",
            "go to the blue ball after pick up a red key",
            state(
                [
                    obj(ObjectKind.KEY, Color.RED, 0, -1),
                    obj(ObjectKind.BALL, Color.BLUE, -2, 0),
                ]
            ),
        ),
        (
            "10_compose_drop",
            "pick up a red key then pick up the blue ball",
            state([obj(ObjectKind.BALL, Color.BLUE, 0, -1)], carried=red_key_in_hand),
        ),
    ]

    OUT.mkdir(parents=True, exist_ok=True)
    for name, goal, st in probes:
        history = HistoryBuffer()
        history.push_observation(describe(st, lexicon))
        prompt = build_prompt(actions, goal, history)
        doc = {
            "name": name,
            "prompt": prompt.text,
            "candidates": [a.display for a in actions],
        }
        (OUT / f"{name}.json").write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "utf-8"
        )
    print(f"wrote {len(probes)} probes to {OUT}")


if __name__ == "__main__":
    main()
