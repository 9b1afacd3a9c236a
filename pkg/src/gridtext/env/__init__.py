"""Deterministic, seedable textual-gridworld engine."""

from .bot import UnsolvableEpisodeError, can_reach, oracle_bot_action, plan_first_effect
from .dynamics import adjacent4, step, success_reward, task_success
from .generate import GenerationError, generate_episode, mix_seed
from .render import read_trace, render_ascii, trace_record, write_trace_line
from .types import (
    ActionSpace,
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
    SEQUENTIAL_FAMILIES,
    StepOutcome,
    TWO_OBJECT_FAMILIES,
    TaskFamily,
    TaskSpec,
    TextAction,
    WorldObject,
)

__all__ = [
    "ActionSpace",
    "Color",
    "Direction",
    "DoorState",
    "Effect",
    "EpisodeConfig",
    "GenerationError",
    "GridState",
    "ObjectKind",
    "PORTABLE_KINDS",
    "Position",
    "ProgressFlags",
    "SEQUENTIAL_FAMILIES",
    "StepOutcome",
    "TWO_OBJECT_FAMILIES",
    "TaskFamily",
    "TaskSpec",
    "TextAction",
    "UnsolvableEpisodeError",
    "WorldObject",
    "adjacent4",
    "can_reach",
    "generate_episode",
    "mix_seed",
    "oracle_bot_action",
    "plan_first_effect",
    "read_trace",
    "render_ascii",
    "step",
    "success_reward",
    "task_success",
    "trace_record",
    "write_trace_line",
]
