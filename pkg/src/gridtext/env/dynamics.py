"""Transition function, success predicates, and the success reward.

Invalid primitive actions (forward into a wall, pick up at an empty cell, ...)
are silent no-ops: the step still counts, nothing else changes.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .types import (
    Color,
    DoorState,
    Effect,
    EpisodeConfig,
    GridState,
    ObjectKind,
    Position,
    ProgressFlags,
    SEQUENTIAL_FAMILIES,
    StepOutcome,
    TaskFamily,
    TaskSpec,
    TextAction,
    WorldObject,
)

REWARD_SCALE = 20.0
REWARD_SLOPE = 0.9


def success_reward(steps_used: int, max_steps: int) -> float:
    """Reward granted on success after N of H steps: 20 * (1 - 0.9 * N / H)."""
    return REWARD_SCALE * (1.0 - REWARD_SLOPE * steps_used / max_steps)


def adjacent4(pos: Position) -> tuple[Position, ...]:
    return (
        Position(pos.x + 1, pos.y),
        Position(pos.x - 1, pos.y),
        Position(pos.x, pos.y + 1),
        Position(pos.x, pos.y - 1),
    )


def _faced_object(state: GridState) -> Optional[WorldObject]:
    cell = state.faced_cell()
    return state.object_at(cell) if state.in_room(cell) else None


def cell_traversable(state: GridState, pos: Position) -> bool:
    """The agent can stand here: a free interior cell or an open doorway."""
    obj = state.object_at(pos)
    if obj is not None:
        return obj.kind is ObjectKind.DOOR and obj.door_state is DoorState.OPEN
    return state.is_interior(pos)


def _matches(obj: Optional[WorldObject], target: tuple[ObjectKind, Color]) -> bool:
    return obj is not None and obj.matches(*target)


def task_success(state: GridState, task: TaskSpec, progress: ProgressFlags) -> bool:
    """Whether the goal is satisfied in `state`, given subgoal progress."""
    fam = task.family
    if fam is TaskFamily.GO_TO:
        return _matches(_faced_object(state), task.target_a)
    if fam is TaskFamily.PICK_UP:
        return _matches(state.carried, task.target_a)
    if fam is TaskFamily.PUT_NEXT_TO:
        return progress.put_done_at is not None
    if fam is TaskFamily.UNLOCK:
        kind, color = task.target_a
        return any(
            obj.kind is ObjectKind.DOOR
            and obj.color is color
            and obj.door_state is DoorState.OPEN
            for obj in state.objects
        )
    if fam in SEQUENTIAL_FAMILIES:
        return progress.b_done_at is not None
    raise ValueError(f"unknown task family: {fam}")


def _subgoal_a_holds(state: GridState, task: TaskSpec) -> bool:
    # First subgoal of every sequential family is picking up target A.
    return _matches(state.carried, task.target_a)


def _subgoal_b_holds(state: GridState, task: TaskSpec) -> bool:
    if task.family in (TaskFamily.PICK_UP_THEN_GO_TO, TaskFamily.GO_TO_AFTER_PICK_UP):
        return _matches(_faced_object(state), task.target_b)
    return _matches(state.carried, task.target_b)


def _update_progress(
    state: GridState,
    task: TaskSpec,
    progress: ProgressFlags,
    dropped: Optional[WorldObject],
) -> ProgressFlags:
    t = state.step_count
    if task.family is TaskFamily.PUT_NEXT_TO:
        if (
            progress.put_done_at is None
            and dropped is not None
            and dropped.matches(*task.target_a)
        ):
            near = any(
                _matches(state.object_at(p), task.target_b)
                for p in adjacent4(dropped.position)
            )
            if near:
                progress = progress.with_put(t)
        return progress
    if task.family in SEQUENTIAL_FAMILIES:
        if progress.a_done_at is None and _subgoal_a_holds(state, task):
            progress = progress.with_a(t)
        # B counts only strictly after A; wrong-order completion never fails
        # the episode, it just does not count.
        if (
            progress.b_done_at is None
            and progress.a_done_at is not None
            and progress.a_done_at < t
            and _subgoal_b_holds(state, task)
        ):
            progress = progress.with_b(t)
    return progress


def _apply_effect(state: GridState, effect: Effect, flip_turns: bool) -> tuple[GridState, Optional[WorldObject]]:
    """Apply one primitive effect. Returns (new state, object dropped this step)."""
    if flip_turns and effect is Effect.TURN_LEFT:
        effect = Effect.TURN_RIGHT
    elif flip_turns and effect is Effect.TURN_RIGHT:
        effect = Effect.TURN_LEFT

    if effect is Effect.TURN_LEFT:
        return replace(state, agent_dir=state.agent_dir.counter_clockwise()), None
    if effect is Effect.TURN_RIGHT:
        return replace(state, agent_dir=state.agent_dir.clockwise()), None
    if effect is Effect.GO_FORWARD:
        if not cell_traversable(state, state.faced_cell()):
            return state, None
        return replace(state, agent_pos=state.faced_cell()), None
    if effect is Effect.PICK_UP:
        obj = _faced_object(state)
        if obj is None or obj.kind is ObjectKind.DOOR or state.carried is not None:
            return state, None
        rest = tuple(o for o in state.objects if o is not obj)
        held = replace(obj, position=None)
        return replace(state, objects=rest, carried=held), None
    if effect is Effect.DROP:
        cell = state.faced_cell()
        if (
            state.carried is None
            or not state.is_interior(cell)
            or state.object_at(cell) is not None
        ):
            return state, None
        placed = replace(state.carried, position=cell)
        return (
            replace(state, objects=state.objects + (placed,), carried=None),
            placed,
        )
    if effect is Effect.TOGGLE:
        obj = _faced_object(state)
        if obj is None or obj.kind is not ObjectKind.DOOR:
            return state, None
        if obj.door_state is DoorState.OPEN:
            new_door = replace(obj, door_state=DoorState.CLOSED)
        elif obj.door_state is DoorState.CLOSED:
            new_door = replace(obj, door_state=DoorState.OPEN)
        else:  # locked: opens only with a matching-color key in hand
            carrying_key = (
                state.carried is not None
                and state.carried.kind is ObjectKind.KEY
                and state.carried.color is obj.color
            )
            if not carrying_key:
                return state, None
            new_door = replace(obj, door_state=DoorState.OPEN)
        objects = tuple(new_door if o is obj else o for o in state.objects)
        return replace(state, objects=objects), None
    if effect is Effect.NOOP:
        return state, None
    raise ValueError(f"unknown effect: {effect}")


def step(
    state: GridState,
    task: TaskSpec,
    action: TextAction,
    config: EpisodeConfig,
    progress: ProgressFlags = ProgressFlags(),
) -> tuple[GridState, StepOutcome, ProgressFlags]:
    """Advance the episode by one action.

    Returns the new state, the step outcome, and updated subgoal progress.
    """
    if state.step_count >= config.max_steps:
        raise ValueError("episode already exhausted: step_count >= max_steps")
    new_state, dropped = _apply_effect(state, action.effect, config.flip_turns)
    new_state = replace(new_state, step_count=state.step_count + 1)
    progress = _update_progress(new_state, task, progress, dropped)
    success = task_success(new_state, task, progress)
    steps_used = new_state.step_count
    if success:
        n = steps_used + config.reward_step_bias
        reward = success_reward(n, config.max_steps)
    else:
        reward = 0.0
    done = success or steps_used >= config.max_steps
    return new_state, StepOutcome(reward, done, success, steps_used), progress
