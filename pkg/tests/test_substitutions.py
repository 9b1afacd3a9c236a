from __future__ import annotations

import re
from dataclasses import replace

import pytest

from gridtext.env.dynamics import step
from gridtext.env.generate import generate_episode, mix_seed
from gridtext.env.types import (
    ActionSpace,
    Color,
    EpisodeConfig,
    ObjectKind,
    ProgressFlags,
    TaskFamily,
    TaskSpec,
)
from gridtext.evaluation.generalization import TRAINING_MIX
from gridtext.text.describe import describe, goal_text
from gridtext.text.lexicon import build_actions, default_lexicon
from gridtext.text.substitution import (
    BUILTIN_TABLES,
    SubstitutionTable,
    apply_substitutions,
    builtin_table,
    parse_table,
)

LEX = default_lexicon()


class TestTables:
    def test_all_builtin_tables_load(self):
        for name in BUILTIN_TABLES:
            table = builtin_table(name)
            assert table.mapping

    def test_unknown_builtin(self):
        with pytest.raises(ValueError, match="unknown builtin"):
            builtin_table("klingon")

    def test_parse_rejects_duplicates_and_bad_lines(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_table("a\tb\na\tc\n", "t")
        with pytest.raises(ValueError, match="two tab-separated"):
            parse_table("just one column\n", "t")

    def test_unknown_source_word_is_an_error(self):
        table = SubstitutionTable("t", "nouns", {"dragon": "wyvern"}, {})
        with pytest.raises(ValueError, match="dragon"):
            apply_substitutions(LEX, table)

    def test_identity_table_is_a_noop(self):
        table = SubstitutionTable("id", "full", {}, {})
        assert apply_substitutions(LEX, table) == LEX


class TestBuiltinMappings:
    def test_invented_red_key_renders_as_faze_dax(self):
        lex = apply_substitutions(LEX, builtin_table("invented"))
        assert lex.noun_phrase(ObjectKind.KEY, Color.RED) == "faze dax"

    def test_oov_nouns_and_adjectives(self):
        nouns = apply_substitutions(LEX, builtin_table("oov_nouns"))
        assert nouns.nouns[ObjectKind.KEY] == "chair"
        assert nouns.adjectives[Color.RED] == "red"  # scope leaves adjectives alone
        adjs = apply_substitutions(LEX, builtin_table("oov_adjectives"))
        assert adjs.adjectives[Color.RED] == "vermillion"
        assert adjs.nouns[ObjectKind.KEY] == "key"

    def test_synonym_actions(self):
        lex = apply_substitutions(LEX, builtin_table("synonym_actions"))
        displays = [a.display for a in build_actions(lex, ActionSpace.CANONICAL)]
        assert displays == [
            "rotate left",
            "rotate right",
            "move ahead",
            "take",
            "release",
            "switch",
        ]

    def test_french_actions_only_keeps_english_observations(self):
        from gridtext.env.types import Effect
        from gridtext.env.types import Position
        from conftest import ball, make_state

        lex = apply_substitutions(LEX, builtin_table("french_actions"))
        assert lex.action_displays[Effect.GO_FORWARD] == "aller tout droit"
        state = make_state([ball(Color.RED, 4, 3)], agent_pos=Position(4, 4))
        assert "You see a red ball 1 step forward" in describe(state, lex).lines


class TestSoundness:
    @pytest.mark.parametrize("name", BUILTIN_TABLES)
    def test_no_source_phrase_survives_rendering(self, name):
        table = builtin_table(name)
        lex = apply_substitutions(LEX, table)
        families = (
            (TaskFamily.GO_TO,) if name == "french" else TRAINING_MIX
        )
        patterns = [
            re.compile(rf"(?<![A-Za-z]){re.escape(src)}(?![A-Za-z])")
            for src in table.mapping
            if "{" not in src  # template-string keys never appear in rendered text
        ]
        if table.scope == "actions":
            # action-scope tables replace displays; observations keep their words
            rendered = ", ".join(
                a.display for a in build_actions(lex, ActionSpace.AUGMENTED)
            )
            for pattern in patterns:
                assert not pattern.search(rendered), (name, pattern.pattern)
            return
        seed_base = sum(ord(c) for c in name)
        for k in range(150):
            cfg = EpisodeConfig(
                seed=mix_seed(seed_base, k),
                num_distractors=8,
                task_families=families,
            )
            state, task = generate_episode(cfg)
            rendered = "\n".join(describe(state, lex).lines) + "\n" + goal_text(task, lex)
            for pattern in patterns:
                assert not pattern.search(rendered), (name, pattern.pattern, rendered)


class TestDecoupling:
    def test_display_substitution_never_changes_dynamics(self):
        cfg = EpisodeConfig(seed=77, num_distractors=8, task_families=(TaskFamily.PICK_UP,))
        effects = [a.effect for a in build_actions(LEX, ActionSpace.CANONICAL)]
        import random

        rng = random.Random(9)
        script = [rng.choice(effects) for _ in range(40)]

        def trajectory(lexicon):
            actions = {a.effect: a for a in build_actions(lexicon, ActionSpace.CANONICAL)}
            state, task = generate_episode(cfg)
            progress = ProgressFlags()
            states = [state]
            for e in script:
                state, outcome, progress = step(state, task, actions[e], cfg, progress)
                states.append(state)
                if outcome.done:
                    break
            return states

        base = trajectory(LEX)
        for name in ("invented", "synonym_actions", "french"):
            assert trajectory(apply_substitutions(LEX, builtin_table(name))) == base
