"""Prompt assembly: action list header, goal line, and a sliding history window.

The prompt is byte-reproducible from its inputs; golden fixtures in the test
suite pin the exact layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .env.types import TextAction
from .text.describe import ObservationText

ACTIONS_HEADER = "Possible action of the agent:"
GOAL_HEADER = "Goal of the agent:"
OBS_LABEL = "Obs."
ACTION_LABEL = "Action"

MAX_OBSERVATIONS = 3
MAX_ACTIONS = 2

OBS_LINE_JOINER = ", "


@dataclass
class HistoryBuffer:
    """Sliding window of the last 3 observations and the 2 actions between them."""

    entries: list[tuple[ObservationText, Optional[str]]] = field(default_factory=list)

    def reset(self) -> None:
        self.entries.clear()

    def push_observation(self, obs: ObservationText) -> None:
        if self.entries and self.entries[-1][1] is None:
            raise ValueError("previous observation has no action yet")
        self.entries.append((obs, None))
        if len(self.entries) > MAX_OBSERVATIONS:
            del self.entries[: len(self.entries) - MAX_OBSERVATIONS]

    def push_action(self, display: str) -> None:
        if not self.entries or self.entries[-1][1] is not None:
            raise ValueError("no pending observation to attach the action to")
        obs, _ = self.entries[-1]
        self.entries[-1] = (obs, display)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Prompt:
    text: str
    goal: str
    step_index: int


def build_prompt(
    actions: Sequence[TextAction],
    goal: str,
    history: HistoryBuffer,
) -> Prompt:
    """Assemble the scoring prompt; the final action slot is left empty.

    History slots are renumbered from 0 with the current observation last, so
    the first steps of an episode emit only the slots that exist.
    """
    if not actions:
        raise ValueError("action list must be non-empty")
    if not history.entries:
        raise ValueError("history must hold at least the current observation")
    lines = [
        f"{ACTIONS_HEADER} {', '.join(a.display for a in actions)}",
        f"{GOAL_HEADER} {goal}",
    ]
    last = len(history.entries) - 1
    for k, (obs, action) in enumerate(history.entries):
        lines.append(f"{OBS_LABEL} {k}: {OBS_LINE_JOINER.join(obs.lines)}")
        if k == last:
            lines.append(f"{ACTION_LABEL} {k}:")
        else:
            lines.append(f"{ACTION_LABEL} {k}: {action}")
    return Prompt(text="\n".join(lines), goal=goal, step_index=last)
