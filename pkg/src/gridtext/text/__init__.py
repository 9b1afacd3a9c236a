"""Textual observations, goals, and vocabulary substitutions."""

from .describe import (
    ObservationText,
    describe,
    goal_text,
    location_phrase,
    visible_window,
)
from .lexicon import Lexicon, build_actions, default_lexicon
from .substitution import (
    BUILTIN_TABLES,
    SubstitutionTable,
    apply_substitutions,
    builtin_table,
    load_table,
    parse_table,
)

__all__ = [
    "BUILTIN_TABLES",
    "Lexicon",
    "ObservationText",
    "SubstitutionTable",
    "apply_substitutions",
    "build_actions",
    "builtin_table",
    "default_lexicon",
    "describe",
    "goal_text",
    "load_table",
    "location_phrase",
    "parse_table",
    "visible_window",
]
