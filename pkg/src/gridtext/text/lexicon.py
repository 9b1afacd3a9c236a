"""The lexicon: every string the environment can utter, in one swappable value.

Substitution tables (out-of-vocabulary words, invented words, action synonyms,
other languages) produce new lexicons without touching dynamics: an action's
display string never influences its effect.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..env.types import (
    ActionSpace,
    Color,
    DoorState,
    Effect,
    ObjectKind,
    TaskFamily,
    TextAction,
)

_VOWELS = "aeiou"


@dataclass(frozen=True)
class Lexicon:
    language_tag: str
    nouns: Mapping[ObjectKind, str]
    adjectives: Mapping[Color, str]
    wall_noun: str
    door_states: Mapping[DoorState, str]
    action_displays: Mapping[Effect, str]
    noop_displays: tuple[str, ...]
    loc_words: Mapping[str, str]
    article_indefinite: str
    article_definite: str
    an_rule: bool
    noun_first: bool
    templates: Mapping[str, str]
    goal_templates: Mapping[TaskFamily, str]

    def noun_phrase(self, kind: ObjectKind, color: Color) -> str:
        adj = self.adjectives[color]
        noun = self.nouns[kind]
        return f"{noun} {adj}" if self.noun_first else f"{adj} {noun}"

    def article(self, role: str, following: str) -> str:
        """Resolve an article role ('a' or 'the') against the word it precedes."""
        if role == "the":
            return self.article_definite
        art = self.article_indefinite
        if self.an_rule and art == "a" and following[:1].lower() in _VOWELS:
            return "an"
        return art


def default_lexicon() -> Lexicon:
    return Lexicon(
        language_tag="en",
        nouns={
            ObjectKind.KEY: "key",
            ObjectKind.BALL: "ball",
            ObjectKind.BOX: "box",
            ObjectKind.DOOR: "door",
        },
        adjectives={color: color.value for color in Color},
        wall_noun="wall",
        door_states={state: state.value for state in DoorState},
        action_displays={
            Effect.TURN_LEFT: "turn left",
            Effect.TURN_RIGHT: "turn right",
            Effect.GO_FORWARD: "go forward",
            Effect.PICK_UP: "pick up",
            Effect.DROP: "drop",
            Effect.TOGGLE: "toggle",
        },
        noop_displays=("sleep", "do nothing", "think"),
        loc_words={
            "step": "step",
            "steps": "steps",
            "left": "left",
            "right": "right",
            "forward": "forward",
            "and": "and",
        },
        article_indefinite="a",
        article_definite="the",
        an_rule=True,
        noun_first=False,
        templates={
            "see": "You see {art} {np} {loc}",
            "see_door": "You see {art} {state} {door} {loc}",
            "carry": "You carry {art} {np}",
        },
        goal_templates={
            TaskFamily.GO_TO: "go to {a_art} {a_np}",
            TaskFamily.PICK_UP: "pick up {a_art} {a_np}",
            TaskFamily.PUT_NEXT_TO: "put {a_art} {a_np} next to {b_art} {b_np}",
            TaskFamily.PICK_UP_THEN_GO_TO: "pick up {a_art} {a_np} then go to {b_art} {b_np}",
            TaskFamily.GO_TO_AFTER_PICK_UP: "go to {b_art} {b_np} after pick up {a_art} {a_np}",
            TaskFamily.UNLOCK: "unlock {a_art} {a_np}",
            TaskFamily.PICK_UP_THEN_PICK_UP: "pick up {a_art} {a_np} then pick up {b_art} {b_np}",
            TaskFamily.PICK_UP_AFTER_PICK_UP: "pick up {b_art} {b_np} after pick up {a_art} {a_np}",
        },
    )


_EFFECT_ORDER_RESTRICTED = (Effect.TURN_LEFT, Effect.TURN_RIGHT, Effect.GO_FORWARD)
_EFFECT_ORDER_CANONICAL = _EFFECT_ORDER_RESTRICTED + (
    Effect.PICK_UP,
    Effect.DROP,
    Effect.TOGGLE,
)


def build_actions(lexicon: Lexicon, space: ActionSpace) -> tuple[TextAction, ...]:
    """The ordered action list exposed to the agent for one action-space variant."""
    effects = (
        _EFFECT_ORDER_RESTRICTED
        if space is ActionSpace.RESTRICTED
        else _EFFECT_ORDER_CANONICAL
    )
    actions = [TextAction(lexicon.action_displays[e], e) for e in effects]
    if space is ActionSpace.AUGMENTED:
        actions.extend(TextAction(d, Effect.NOOP) for d in lexicon.noop_displays)
    return tuple(actions)
