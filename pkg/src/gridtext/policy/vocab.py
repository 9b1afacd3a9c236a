"""Closed word-level vocabulary for the built-in scorer backends.

Tokens are words (letters only, including accented ones), digit runs, and the
three punctuation marks the prompt templates use. Anything else maps to the
reserved UNK id, which is how out-of-vocabulary generalization variants reach
the backends.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

from .. import prompting
from ..text.lexicon import Lexicon

_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+|[.,:]", re.UNICODE)
_PLACEHOLDER_RE = re.compile(r"\{[^}]*\}")

UNK_TOKEN = "<unk>"
UNK_ID = 0


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]

    def __post_init__(self):
        if self.words[UNK_ID] != UNK_TOKEN:
            raise ValueError("word 0 must be the UNK token")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def id_of(self, word: str) -> int:
        return self._index.get(word, UNK_ID)

    def encode(self, text: str) -> tuple[int, ...]:
        return tuple(self.id_of(w) for w in tokenize(text))

    def manifest_hash(self) -> str:
        blob = json.dumps(list(self.words), ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def build_vocabulary(lexicon: Lexicon) -> Vocabulary:
    """Enumerate every word the prompt pipeline can emit under this lexicon."""
    strings: list[str] = [
        prompting.ACTIONS_HEADER,
        prompting.GOAL_HEADER,
        prompting.OBS_LABEL,
        prompting.ACTION_LABEL,
        lexicon.wall_noun,
        lexicon.article_indefinite,
        lexicon.article_definite,
    ]
    if lexicon.an_rule:
        strings.append("an")
    strings.extend(lexicon.nouns.values())
    strings.extend(lexicon.adjectives.values())
    strings.extend(lexicon.door_states.values())
    strings.extend(lexicon.action_displays.values())
    strings.extend(lexicon.noop_displays)
    strings.extend(lexicon.loc_words.values())
    strings.extend(_PLACEHOLDER_RE.sub(" ", t) for t in lexicon.templates.values())
    strings.extend(_PLACEHOLDER_RE.sub(" ", t) for t in lexicon.goal_templates.values())

    words = {w for s in strings for w in tokenize(s)}
    words.update(str(d) for d in range(10))
    words.update([".", ",", ":"])
    return Vocabulary(words=(UNK_TOKEN, *sorted(words)))
