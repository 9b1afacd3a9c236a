"""Core value types for the gridworld: positions, objects, state, tasks, actions.

All state types are immutable values; stepping produces new instances, so
instances can be freely shared between threads and replayed deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import NamedTuple, Optional


class Position(NamedTuple):
    x: int  # column, 0-based
    y: int  # row, 0-based


class Direction(IntEnum):
    """Agent heading. Rotations cycle with period 4; clockwise = +1."""

    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    def clockwise(self) -> "Direction":
        return Direction((self + 1) % 4)

    def counter_clockwise(self) -> "Direction":
        return Direction((self - 1) % 4)

    def forward_vec(self) -> tuple[int, int]:
        return _FORWARD[self]

    def right_vec(self) -> tuple[int, int]:
        return _FORWARD[self.clockwise()]


# y grows downward (row index), so NORTH is -y.
_FORWARD = {
    Direction.NORTH: (0, -1),
    Direction.EAST: (1, 0),
    Direction.SOUTH: (0, 1),
    Direction.WEST: (-1, 0),
}


class Color(str, Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    PURPLE = "purple"
    YELLOW = "yellow"
    GREY = "grey"


class ObjectKind(str, Enum):
    KEY = "key"
    BALL = "ball"
    BOX = "box"
    DOOR = "door"


# Kinds an agent can pick up (doors are fixed in walls).
PORTABLE_KINDS = (ObjectKind.KEY, ObjectKind.BALL, ObjectKind.BOX)


class DoorState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"
    LOCKED = "locked"


@dataclass(frozen=True)
class WorldObject:
    """An object on the grid, or in the agent's hands (position=None)."""

    kind: ObjectKind
    color: Color
    position: Optional[Position]
    door_state: Optional[DoorState] = None

    def __post_init__(self):
        if (self.kind is ObjectKind.DOOR) != (self.door_state is not None):
            raise ValueError("door_state present iff kind is door")

    def matches(self, kind: ObjectKind, color: Color) -> bool:
        return self.kind is kind and self.color is color


class Effect(str, Enum):
    """The dynamics-level meaning of an action, independent of its display string."""

    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    GO_FORWARD = "go_forward"
    PICK_UP = "pick_up"
    DROP = "drop"
    TOGGLE = "toggle"
    NOOP = "noop"


@dataclass(frozen=True)
class TextAction:
    """A command the agent can issue: what it says (display) and what it does."""

    display: str
    effect: Effect

    def __post_init__(self):
        if not self.display:
            raise ValueError("action display must be non-empty")


class TaskFamily(str, Enum):
    GO_TO = "go_to"
    PICK_UP = "pick_up"
    PUT_NEXT_TO = "put_next_to"
    PICK_UP_THEN_GO_TO = "pick_up_then_go_to"
    GO_TO_AFTER_PICK_UP = "go_to_after_pick_up"
    UNLOCK = "unlock"
    # evaluation-only recompositions
    PICK_UP_THEN_PICK_UP = "pick_up_then_pick_up"
    PICK_UP_AFTER_PICK_UP = "pick_up_after_pick_up"


TWO_OBJECT_FAMILIES = frozenset(
    {
        TaskFamily.PUT_NEXT_TO,
        TaskFamily.PICK_UP_THEN_GO_TO,
        TaskFamily.GO_TO_AFTER_PICK_UP,
        TaskFamily.PICK_UP_THEN_PICK_UP,
        TaskFamily.PICK_UP_AFTER_PICK_UP,
    }
)

SEQUENTIAL_FAMILIES = frozenset(
    {
        TaskFamily.PICK_UP_THEN_GO_TO,
        TaskFamily.GO_TO_AFTER_PICK_UP,
        TaskFamily.PICK_UP_THEN_PICK_UP,
        TaskFamily.PICK_UP_AFTER_PICK_UP,
    }
)


@dataclass(frozen=True)
class TaskSpec:
    """A goal: a task family plus its target object descriptor(s).

    For sequential families target_a is always the subgoal the agent must
    complete first (the pick-up), regardless of the word order in the goal text.
    """

    family: TaskFamily
    target_a: tuple[ObjectKind, Color]
    target_b: Optional[tuple[ObjectKind, Color]] = None
    article_a: str = "the"
    article_b: str = "the"

    def __post_init__(self):
        if (self.family in TWO_OBJECT_FAMILIES) != (self.target_b is not None):
            raise ValueError("target_b present iff family is a two-object task")
        if self.family is TaskFamily.UNLOCK and self.target_a[0] is not ObjectKind.DOOR:
            raise ValueError("unlock target must be a door")
        for art in (self.article_a, self.article_b):
            if art not in ("a", "the"):
                raise ValueError("articles must be 'a' or 'the'")


@dataclass(frozen=True)
class GridState:
    """Full world state. The border ring of cells is wall; doors live on it."""

    room_size: int
    objects: tuple[WorldObject, ...]
    agent_pos: Position
    agent_dir: Direction
    carried: Optional[WorldObject]
    step_count: int
    rng_seed: int

    def object_at(self, pos: Position) -> Optional[WorldObject]:
        for obj in self.objects:
            if obj.position == pos:
                return obj
        return None

    def is_wall(self, pos: Position) -> bool:
        return (
            pos.x == 0
            or pos.y == 0
            or pos.x == self.room_size - 1
            or pos.y == self.room_size - 1
        )

    def in_room(self, pos: Position) -> bool:
        return 0 <= pos.x < self.room_size and 0 <= pos.y < self.room_size

    def is_interior(self, pos: Position) -> bool:
        return self.in_room(pos) and not self.is_wall(pos)

    def faced_cell(self) -> Position:
        dx, dy = self.agent_dir.forward_vec()
        return Position(self.agent_pos.x + dx, self.agent_pos.y + dy)


class ActionSpace(str, Enum):
    RESTRICTED = "restricted"  # 3 actions: the useful navigation set
    CANONICAL = "canonical"  # 6 actions
    AUGMENTED = "augmented"  # 9 actions: canonical + three no-ops


@dataclass(frozen=True)
class EpisodeConfig:
    room_size: int = 8
    num_distractors: int = 8
    max_steps: int = 64
    action_space: ActionSpace = ActionSpace.CANONICAL
    flip_turns: bool = False
    seed: int = 0
    task_families: tuple[TaskFamily, ...] = (TaskFamily.GO_TO,)
    # N in the success reward is steps_used + reward_step_bias; bias -1 counts
    # the first step as zero.
    reward_step_bias: int = 0
    # Optional whitelist of (kind, color) goal descriptors, e.g. to evaluate on
    # held-out object combinations. None = all combinations.
    target_pool: Optional[tuple[tuple[ObjectKind, Color], ...]] = None

    def __post_init__(self):
        if self.room_size < 4:
            raise ValueError("room too small: need at least a 2x2 interior")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.num_distractors < 0:
            raise ValueError("num_distractors must be >= 0")
        if not self.task_families:
            raise ValueError("task_families must be non-empty")


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    done: bool
    success: bool
    steps_used: int


@dataclass(frozen=True)
class ProgressFlags:
    """Completion timestamps of subgoals, for order-sensitive tasks.

    a_done_at / b_done_at hold the step_count at which each subgoal of a
    sequential task was first satisfied (B only counts strictly after A).
    put_done_at records the drop event that placed a target-A match next to a
    target-B match.
    """

    a_done_at: Optional[int] = None
    b_done_at: Optional[int] = None
    put_done_at: Optional[int] = None

    def with_a(self, t: int) -> "ProgressFlags":
        return replace(self, a_done_at=t)

    def with_b(self, t: int) -> "ProgressFlags":
        return replace(self, b_done_at=t)

    def with_put(self, t: int) -> "ProgressFlags":
        return replace(self, put_done_at=t)
