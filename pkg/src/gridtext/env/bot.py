"""Planner bot with full state access.

Breadth-first search over (position, heading) with unit cost for rotations and
forward moves. Repeated application of oracle_bot_action solves any generated
episode within its step budget; it is used to produce expert trajectories and
to guard procedural generation against unsolvable layouts.
"""
from __future__ import annotations

from collections import deque
from typing import Callable, Optional

from .types import (
    Color,
    Direction,
    DoorState,
    Effect,
    EpisodeConfig,
    GridState,
    ObjectKind,
    Position,
    ProgressFlags,
    TaskFamily,
    TaskSpec,
    TextAction,
)

GoalTest = Callable[[Position, Direction], bool]


class UnsolvableEpisodeError(RuntimeError):
    """No action sequence can reach the current subgoal (generation bug guard)."""


def _traversable(state: GridState, pos: Position) -> bool:
    from .dynamics import cell_traversable

    return cell_traversable(state, pos)


def plan_first_effect(state: GridState, goal_test: GoalTest) -> Optional[Effect]:
    """First effect of a shortest path to any (pos, dir) satisfying goal_test.

    Returns None when the start already satisfies the goal. The returned effect
    is the *executed* rotation/move; turn flipping is resolved by the caller.
    """
    start = (state.agent_pos, state.agent_dir)
    if goal_test(*start):
        return None
    seen = {start}
    queue: deque[tuple[tuple[Position, Direction], Effect]] = deque()

    def successors(pos: Position, d: Direction):
        yield (pos, d.counter_clockwise()), Effect.TURN_LEFT
        yield (pos, d.clockwise()), Effect.TURN_RIGHT
        dx, dy = d.forward_vec()
        ahead = Position(pos.x + dx, pos.y + dy)
        if _traversable(state, ahead):
            yield (ahead, d), Effect.GO_FORWARD

    for node, eff in successors(*start):
        if node not in seen:
            seen.add(node)
            queue.append((node, eff))
    while queue:
        (pos, d), first = queue.popleft()
        if goal_test(pos, d):
            return first
        for node, _ in successors(pos, d):
            if node not in seen:
                seen.add(node)
                queue.append((node, first))
    raise UnsolvableEpisodeError("no path to subgoal")


def can_reach(state: GridState, goal_test: GoalTest) -> bool:
    try:
        plan_first_effect(state, goal_test)
        return True
    except UnsolvableEpisodeError:
        return False


def _faced(state: GridState, pos: Position, d: Direction) -> Position:
    dx, dy = d.forward_vec()
    return Position(pos.x + dx, pos.y + dy)


def face_match_test(state: GridState, target: tuple[ObjectKind, Color]) -> GoalTest:
    def test(pos: Position, d: Direction) -> bool:
        obj = state.object_at(_faced(state, pos, d))
        return obj is not None and obj.matches(*target)

    return test


def face_cell_test(state: GridState, cell: Position) -> GoalTest:
    def test(pos: Position, d: Direction) -> bool:
        return _faced(state, pos, d) == cell

    return test


def face_empty_test(
    state: GridState, adjacent_to: Optional[tuple[ObjectKind, Color]] = None
) -> GoalTest:
    from .dynamics import adjacent4

    def test(pos: Position, d: Direction) -> bool:
        cell = _faced(state, pos, d)
        if not state.is_interior(cell) or state.object_at(cell) is not None:
            return False
        if adjacent_to is None:
            return True
        return any(
            (obj := state.object_at(p)) is not None and obj.matches(*adjacent_to)
            for p in adjacent4(cell)
        )

    return test


def _nav_or(state: GridState, goal_test: GoalTest, at_goal: Effect) -> Effect:
    effect = plan_first_effect(state, goal_test)
    return at_goal if effect is None else effect


def _pickup_routine(state: GridState, target: tuple[ObjectKind, Color]) -> Effect:
    if state.carried is not None:
        # Hands are full with something else: drop it on the nearest free cell.
        return _nav_or(state, face_empty_test(state), Effect.DROP)
    return _nav_or(state, face_match_test(state, target), Effect.PICK_UP)


def _goto_routine(state: GridState, target: tuple[ObjectKind, Color]) -> Effect:
    effect = plan_first_effect(state, face_match_test(state, target))
    if effect is not None:
        return effect
    # Already facing the target before any step was taken. Hold position with
    # an action that leaves the state unchanged; toggle is a silent no-op on
    # anything but a door.
    obj = state.object_at(state.faced_cell())
    if obj is not None and obj.kind is not ObjectKind.DOOR:
        return Effect.TOGGLE
    return Effect.TURN_LEFT


def _decide(state: GridState, task: TaskSpec, progress: ProgressFlags) -> Effect:
    fam = task.family
    if fam is TaskFamily.GO_TO:
        return _goto_routine(state, task.target_a)
    if fam is TaskFamily.PICK_UP:
        return _pickup_routine(state, task.target_a)
    if fam is TaskFamily.PUT_NEXT_TO:
        if state.carried is not None and state.carried.matches(*task.target_a):
            return _nav_or(
                state, face_empty_test(state, adjacent_to=task.target_b), Effect.DROP
            )
        return _pickup_routine(state, task.target_a)
    if fam in (TaskFamily.PICK_UP_THEN_GO_TO, TaskFamily.GO_TO_AFTER_PICK_UP):
        if progress.a_done_at is None:
            return _pickup_routine(state, task.target_a)
        return _goto_routine(state, task.target_b)
    if fam in (TaskFamily.PICK_UP_THEN_PICK_UP, TaskFamily.PICK_UP_AFTER_PICK_UP):
        if progress.a_done_at is None:
            return _pickup_routine(state, task.target_a)
        return _pickup_routine(state, task.target_b)
    if fam is TaskFamily.UNLOCK:
        _, color = task.target_a
        door = next(
            (o for o in state.objects if o.kind is ObjectKind.DOOR and o.color is color),
            None,
        )
        if door is None:
            raise UnsolvableEpisodeError("unlock episode has no matching door")
        if door.door_state is DoorState.OPEN:
            return Effect.TURN_LEFT  # already solved; caller should not be here
        carrying_key = (
            state.carried is not None
            and state.carried.kind is ObjectKind.KEY
            and state.carried.color is color
        )
        if carrying_key:
            return _nav_or(state, face_cell_test(state, door.position), Effect.TOGGLE)
        return _pickup_routine(state, (ObjectKind.KEY, color))
    raise ValueError(f"unknown task family: {fam}")


def oracle_bot_action(
    state: GridState,
    task: TaskSpec,
    progress: ProgressFlags,
    config: EpisodeConfig,
    actions: tuple[TextAction, ...],
) -> TextAction:
    """One primitive action on a shortest path toward the current subgoal."""
    effect = _decide(state, task, progress)
    if config.flip_turns:
        if effect is Effect.TURN_LEFT:
            effect = Effect.TURN_RIGHT
        elif effect is Effect.TURN_RIGHT:
            effect = Effect.TURN_LEFT
    for action in actions:
        if action.effect is effect:
            return action
    raise UnsolvableEpisodeError(f"action space lacks required effect {effect}")
