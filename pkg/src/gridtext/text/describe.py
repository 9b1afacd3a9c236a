"""Partial-view textualization: the observation function of the environment.

The agent sees the 6x6 patch of cells in front of it (forward offsets 0..5,
lateral offsets -3..+2 with the agent at lateral 0) and receives one templated
sentence per visible entity.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..env.types import (
    DoorState,
    GridState,
    ObjectKind,
    Position,
    TaskSpec,
)
from .lexicon import Lexicon

FORWARD_RANGE = range(0, 6)
LATERAL_RANGE = range(-3, 3)


@dataclass(frozen=True)
class ObservationText:
    lines: tuple[str, ...]


def visible_window(state: GridState) -> list[tuple[Position, int, int]]:
    """Visible cells as (position, forward offset, lateral offset), sorted.

    Cells strictly behind a closed or locked door in the same sight column are
    excluded.
    """
    fx, fy = state.agent_dir.forward_vec()
    rx, ry = state.agent_dir.right_vec()
    ax, ay = state.agent_pos

    blockers: dict[int, int] = {}
    cells = []
    for f in FORWARD_RANGE:
        for l in LATERAL_RANGE:
            pos = Position(ax + f * fx + l * rx, ay + f * fy + l * ry)
            if not state.in_room(pos):
                continue
            cells.append((pos, f, l))
            obj = state.object_at(pos)
            if (
                obj is not None
                and obj.kind is ObjectKind.DOOR
                and obj.door_state in (DoorState.CLOSED, DoorState.LOCKED)
            ):
                prev = blockers.get(l)
                if prev is None or f < prev:
                    blockers[l] = f
    visible = [
        (pos, f, l)
        for (pos, f, l) in cells
        if l not in blockers or f <= blockers[l]
    ]
    visible.sort(key=lambda c: (c[1], c[2]))
    return visible


def location_phrase(f: int, l: int, lexicon: Lexicon) -> str:
    """'<n> step(s) left|right' and/or '<n> step(s) forward', lateral first."""
    w = lexicon.loc_words
    parts = []
    if l != 0:
        n = abs(l)
        side = w["left"] if l < 0 else w["right"]
        parts.append(f"{n} {w['step'] if n == 1 else w['steps']} {side}")
    if f != 0:
        parts.append(f"{f} {w['step'] if f == 1 else w['steps']} {w['forward']}")
    return f" {w['and']} ".join(parts)


def _wall_anchor(cells: list[tuple[int, int]]) -> tuple[int, int]:
    # Closest visible cell of the wall; ties prefer the pure-axis description.
    return min(cells, key=lambda fl: (fl[0] + abs(fl[1]), abs(fl[1]), fl[0]))


def describe(state: GridState, lexicon: Lexicon) -> ObservationText:
    """One line per visible entity, ordered by (forward, lateral) offsets."""
    entries: list[tuple[int, int, str]] = []
    walls: dict[str, list[tuple[int, int]]] = {}
    size = state.room_size

    for pos, f, l in visible_window(state):
        if f == 0 and l == 0:
            continue  # the agent's own cell (it may stand in an open doorway)
        obj = state.object_at(pos)
        if obj is not None:
            loc = location_phrase(f, l, lexicon)
            if obj.kind is ObjectKind.DOOR:
                state_word = lexicon.door_states[obj.door_state]
                line = lexicon.templates["see_door"].format(
                    art=lexicon.article("a", state_word),
                    state=state_word,
                    door=lexicon.nouns[ObjectKind.DOOR],
                    loc=loc,
                )
            else:
                np = lexicon.noun_phrase(obj.kind, obj.color)
                line = lexicon.templates["see"].format(
                    art=lexicon.article("a", np), np=np, loc=loc
                )
            entries.append((f, l, line))
        elif state.is_wall(pos):
            if pos.y == 0:
                walls.setdefault("n", []).append((f, l))
            if pos.y == size - 1:
                walls.setdefault("s", []).append((f, l))
            if pos.x == 0:
                walls.setdefault("w", []).append((f, l))
            if pos.x == size - 1:
                walls.setdefault("e", []).append((f, l))

    for side in sorted(walls):
        f, l = _wall_anchor(walls[side])
        line = lexicon.templates["see"].format(
            art=lexicon.article("a", lexicon.wall_noun),
            np=lexicon.wall_noun,
            loc=location_phrase(f, l, lexicon),
        )
        entries.append((f, l, line))

    entries.sort(key=lambda e: (e[0], e[1]))
    lines = [line for _, _, line in entries]

    if state.carried is not None:
        np = lexicon.noun_phrase(state.carried.kind, state.carried.color)
        lines.append(
            lexicon.templates["carry"].format(
                art=lexicon.article("a", np), np=np
            )
        )
    return ObservationText(tuple(lines))


def goal_text(task: TaskSpec, lexicon: Lexicon) -> str:
    a_np = lexicon.noun_phrase(*task.target_a)
    fields = {
        "a_np": a_np,
        "a_art": lexicon.article(task.article_a, a_np),
    }
    if task.target_b is not None:
        b_np = lexicon.noun_phrase(*task.target_b)
        fields["b_np"] = b_np
        fields["b_art"] = lexicon.article(task.article_b, b_np)
    return lexicon.goal_templates[task.family].format(**fields)
