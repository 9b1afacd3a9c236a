"""Word-substitution tables and their application to a lexicon.

Tables load from two-column text files (source TAB replacement). Lines whose
first column starts with '@' are directives that adjust lexicon-level settings
(word order, articles) that a plain word mapping cannot express.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

from .lexicon import Lexicon

SCOPES = ("nouns", "adjectives", "nouns_adjectives", "actions", "full")

BUILTIN_TABLES = (
    "oov_nouns",
    "oov_adjectives",
    "invented",
    "synonym_actions",
    "french",
    "french_actions",
)


@dataclass(frozen=True)
class SubstitutionTable:
    name: str
    scope: str
    mapping: Mapping[str, str]
    directives: Mapping[str, str]

    def __post_init__(self):
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}; expected one of {SCOPES}")
        if len(set(self.mapping)) != len(self.mapping):
            raise ValueError("duplicate source words in table")


def parse_table(text: str, name: str) -> SubstitutionTable:
    mapping: dict[str, str] = {}
    directives: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"{name}:{lineno}: expected two tab-separated columns")
        src, dst = line.split("\t", 1)
        if src.startswith("@"):
            directives[src[1:]] = dst
        elif src in mapping:
            raise ValueError(f"{name}:{lineno}: duplicate source word {src!r}")
        else:
            mapping[src] = dst
    scope = directives.pop("scope", "full")
    return SubstitutionTable(name=name, scope=scope, mapping=mapping, directives=directives)


def load_table(path: str | Path) -> SubstitutionTable:
    p = Path(path)
    return parse_table(p.read_text(encoding="utf-8"), p.stem)


def builtin_table(name: str) -> SubstitutionTable:
    if name not in BUILTIN_TABLES:
        raise ValueError(f"unknown builtin table {name!r}; have {BUILTIN_TABLES}")
    text = resources.files("gridtext.text").joinpath(f"data/{name}.tsv").read_text("utf-8")
    return parse_table(text, name)


def apply_substitutions(lexicon: Lexicon, table: SubstitutionTable) -> Lexicon:
    """New lexicon with the table's words replaced.

    Every source word in the table must match something in the lexicon fields
    the scope covers, otherwise the table is malformed for this lexicon.
    """
    used: set[str] = set()

    def sub(value: str) -> str:
        if value in table.mapping:
            used.add(value)
            return table.mapping[value]
        return value

    def sub_map(m: Mapping) -> dict:
        return {k: sub(v) for k, v in m.items()}

    fields: dict = {}
    scope = table.scope
    if scope in ("nouns", "nouns_adjectives", "full"):
        fields["nouns"] = sub_map(lexicon.nouns)
        fields["wall_noun"] = sub(lexicon.wall_noun)
    if scope in ("adjectives", "nouns_adjectives", "full"):
        fields["adjectives"] = sub_map(lexicon.adjectives)
    if scope in ("actions", "full"):
        fields["action_displays"] = sub_map(lexicon.action_displays)
        fields["noop_displays"] = tuple(sub(d) for d in lexicon.noop_displays)
    if scope == "full":
        fields["door_states"] = sub_map(lexicon.door_states)
        fields["loc_words"] = sub_map(lexicon.loc_words)
        fields["templates"] = sub_map(lexicon.templates)
        fields["goal_templates"] = sub_map(lexicon.goal_templates)

    unused = set(table.mapping) - used
    if unused:
        raise ValueError(
            f"table {table.name!r} has source words not present in the lexicon "
            f"(scope {scope}): {sorted(unused)}"
        )

    d = table.directives
    if "np_order" in d:
        if d["np_order"] not in ("adj_first", "noun_first"):
            raise ValueError(f"bad np_order directive: {d['np_order']!r}")
        fields["noun_first"] = d["np_order"] == "noun_first"
    if "article_indefinite" in d:
        fields["article_indefinite"] = d["article_indefinite"]
    if "article_definite" in d:
        fields["article_definite"] = d["article_definite"]
    if "an_rule" in d:
        fields["an_rule"] = d["an_rule"] == "on"
    if "language" in d:
        fields["language_tag"] = d["language"]

    return replace(lexicon, **fields)
