"""Debug rendering and episode trace export."""
from __future__ import annotations

import json
from typing import IO

from .types import Direction, DoorState, GridState, ObjectKind, Position, StepOutcome

_AGENT_GLYPHS = {
    Direction.NORTH: "^",
    Direction.EAST: ">",
    Direction.SOUTH: "v",
    Direction.WEST: "<",
}

_KIND_GLYPHS = {
    ObjectKind.KEY: "k",
    ObjectKind.BALL: "o",
    ObjectKind.BOX: "b",
}

_DOOR_GLYPHS = {
    DoorState.OPEN: "_",
    DoorState.CLOSED: "d",
    DoorState.LOCKED: "D",
}


def render_ascii(state: GridState) -> str:
    """One character per cell; the agent is a heading glyph (^ > v <)."""
    rows = []
    for y in range(state.room_size):
        row = []
        for x in range(state.room_size):
            pos = Position(x, y)
            obj = state.object_at(pos)
            if pos == state.agent_pos:
                row.append(_AGENT_GLYPHS[state.agent_dir])
            elif obj is not None and obj.kind is ObjectKind.DOOR:
                row.append(_DOOR_GLYPHS[obj.door_state])
            elif obj is not None:
                row.append(_KIND_GLYPHS[obj.kind])
            elif state.is_wall(pos):
                row.append("#")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows)


def trace_record(
    seed: int,
    step: int,
    action_display: str,
    outcome: StepOutcome,
) -> dict:
    return {
        "seed": seed,
        "step": step,
        "action": action_display,
        "reward": outcome.reward,
        "done": outcome.done,
        "success": outcome.success,
    }


def write_trace_line(fp: IO[str], record: dict) -> None:
    fp.write(json.dumps(record, sort_keys=True) + "\n")


def read_trace(fp: IO[str]) -> list[dict]:
    return [json.loads(line) for line in fp if line.strip()]
