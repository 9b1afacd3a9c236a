"""Procedural episode generation, deterministic under a fixed seed."""
from __future__ import annotations

import random
from typing import Iterable, Optional

from .bot import UnsolvableEpisodeError, oracle_bot_action
from .types import (
    Color,
    Direction,
    DoorState,
    Effect,
    EpisodeConfig,
    GridState,
    ObjectKind,
    PORTABLE_KINDS,
    Position,
    ProgressFlags,
    TWO_OBJECT_FAMILIES,
    TaskFamily,
    TaskSpec,
    TextAction,
    WorldObject,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_MAX_LAYOUT_ATTEMPTS = 100


class GenerationError(RuntimeError):
    """Episode generation failed (room too small or no solvable layout found)."""


def _splitmix64(x: int) -> int:
    # Standard splitmix64 finalizer; stable across platforms and runs.
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(master: int, *counters: int) -> int:
    """Derive an independent seed stream from a master seed and counters.

    Parallel environments index themselves with distinct counters so their
    episode streams never overlap.
    """
    h = _splitmix64(master & _MASK64)
    for c in counters:
        h = _splitmix64(h ^ (c & _MASK64))
    return h


def _interior_cells(room_size: int) -> list[Position]:
    return [
        Position(x, y)
        for y in range(1, room_size - 1)
        for x in range(1, room_size - 1)
    ]


def _border_door_cells(room_size: int) -> list[Position]:
    cells = []
    for i in range(1, room_size - 1):
        cells.extend(
            [
                Position(i, 0),
                Position(i, room_size - 1),
                Position(0, i),
                Position(room_size - 1, i),
            ]
        )
    return sorted(cells)


def _portable_pool(config: EpisodeConfig) -> list[tuple[ObjectKind, Color]]:
    if config.target_pool is not None:
        pool = [t for t in config.target_pool if t[0] is not ObjectKind.DOOR]
    else:
        pool = [(k, c) for k in PORTABLE_KINDS for c in Color]
    if not pool:
        raise GenerationError("target pool contains no portable descriptors")
    return sorted(pool, key=lambda t: (t[0].value, t[1].value))


def _door_colors(config: EpisodeConfig) -> list[Color]:
    if config.target_pool is not None:
        colors = [c for k, c in config.target_pool if k is ObjectKind.DOOR]
    else:
        colors = list(Color)
    if not colors:
        raise GenerationError("target pool contains no door descriptors")
    return sorted(colors, key=lambda c: c.value)


def _article(descriptor: tuple[ObjectKind, Color], objects: Iterable[WorldObject]) -> str:
    matches = sum(1 for o in objects if o.matches(*descriptor))
    return "the" if matches == 1 else "a"


# Displays are irrelevant for solvability checks; effects drive the dynamics.
_SOLVER_ACTIONS = tuple(
    TextAction(e.value, e)
    for e in (
        Effect.TURN_LEFT,
        Effect.TURN_RIGHT,
        Effect.GO_FORWARD,
        Effect.PICK_UP,
        Effect.DROP,
        Effect.TOGGLE,
    )
)


def _bot_solves(state: GridState, task: TaskSpec, config: EpisodeConfig) -> bool:
    """Replay the planner bot; a layout counts as solvable iff the bot succeeds.

    Solvability does not depend on turn flipping (a relabeling of rotations),
    so the replay always runs unflipped.
    """
    from dataclasses import replace

    from .dynamics import step

    cfg = replace(config, flip_turns=False)
    progress = ProgressFlags()
    for _ in range(cfg.max_steps):
        try:
            action = oracle_bot_action(state, task, progress, cfg, _SOLVER_ACTIONS)
        except UnsolvableEpisodeError:
            return False
        state, outcome, progress = step(state, task, action, cfg, progress)
        if outcome.done:
            return outcome.success
    return False


def generate_episode(
    config: EpisodeConfig,
    family_filter: Optional[set[TaskFamily]] = None,
) -> tuple[GridState, TaskSpec]:
    """Build a solvable episode: targets, distractors, and agent placement.

    Identical (config, filter) inputs yield identical episodes. Raises
    GenerationError when the room cannot hold the requested object count or no
    solvable layout is found within the retry budget.
    """
    families = sorted(set(config.task_families), key=lambda f: f.value)
    if family_filter is not None:
        families = [f for f in families if f in family_filter]
    if not families:
        raise ValueError("no task families to sample from")

    rng = random.Random(mix_seed(config.seed))
    family = families[rng.randrange(len(families))]

    interior = _interior_cells(config.room_size)
    n_objects = config.num_distractors + (2 if family in TWO_OBJECT_FAMILIES else 1)
    if family is TaskFamily.UNLOCK:
        n_objects = config.num_distractors + 1  # key; the door sits on the wall
    if n_objects + 1 > len(interior):
        raise GenerationError(
            f"room interior of {len(interior)} cells cannot hold "
            f"{n_objects} objects plus the agent"
        )

    for _ in range(_MAX_LAYOUT_ATTEMPTS):
        episode = _try_layout(rng, config, family, interior)
        if episode is not None:
            return episode
    raise GenerationError(
        f"no solvable layout for {family.value} after {_MAX_LAYOUT_ATTEMPTS} attempts"
    )


def _try_layout(
    rng: random.Random,
    config: EpisodeConfig,
    family: TaskFamily,
    interior: list[Position],
) -> Optional[tuple[GridState, TaskSpec]]:
    free = list(interior)
    objects: list[WorldObject] = []

    def place(kind: ObjectKind, color: Color) -> WorldObject:
        cell = free.pop(rng.randrange(len(free)))
        obj = WorldObject(kind, color, cell)
        objects.append(obj)
        return obj

    target_b: Optional[tuple[ObjectKind, Color]] = None
    if family is TaskFamily.UNLOCK:
        color = rng.choice(_door_colors(config))
        target_a = (ObjectKind.DOOR, color)
        door_cell = rng.choice(_border_door_cells(config.room_size))
        objects.append(
            WorldObject(ObjectKind.DOOR, color, door_cell, DoorState.LOCKED)
        )
        place(ObjectKind.KEY, color)
    else:
        pool = _portable_pool(config)
        target_a = rng.choice(pool)
        place(*target_a)
        if family in TWO_OBJECT_FAMILIES:
            others = [t for t in pool if t != target_a]
            if not others:
                raise GenerationError("two-object task needs two distinct descriptors")
            target_b = rng.choice(others)
            place(*target_b)

    for _ in range(config.num_distractors):
        place(rng.choice(PORTABLE_KINDS), rng.choice(list(Color)))

    agent_pos = free.pop(rng.randrange(len(free)))
    agent_dir = Direction(rng.randrange(4))

    state = GridState(
        room_size=config.room_size,
        objects=tuple(objects),
        agent_pos=agent_pos,
        agent_dir=agent_dir,
        carried=None,
        step_count=0,
        rng_seed=config.seed,
    )

    if family is TaskFamily.GO_TO:
        # Do not spawn already facing a match; the episode would be degenerate.
        for _ in range(50):
            faced = state.object_at(state.faced_cell())
            if faced is None or not faced.matches(*target_a):
                break
            from dataclasses import replace

            state = replace(state, agent_dir=Direction(rng.randrange(4)))
        else:
            return None

    task = TaskSpec(
        family=family,
        target_a=target_a,
        target_b=target_b,
        article_a=_article(target_a, objects),
        article_b=_article(target_b, objects) if target_b else "the",
    )
    if not _bot_solves(state, task, config):
        return None
    return state, task
