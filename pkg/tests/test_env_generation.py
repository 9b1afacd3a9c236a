from __future__ import annotations

from dataclasses import replace

import pytest

from gridtext.env.generate import GenerationError, generate_episode, mix_seed
from gridtext.env.types import (
    Color,
    DoorState,
    EpisodeConfig,
    ObjectKind,
    TaskFamily,
)


class TestDeterminism:
    def test_same_seed_same_episode(self):
        cfg = EpisodeConfig(seed=7, num_distractors=8)
        assert generate_episode(cfg) == generate_episode(cfg)

    def test_different_seeds_differ(self):
        a = generate_episode(EpisodeConfig(seed=1))
        b = generate_episode(EpisodeConfig(seed=2))
        assert a != b

    def test_mix_seed_streams_are_distinct(self):
        seeds = {mix_seed(42, i, j) for i in range(32) for j in range(100)}
        assert len(seeds) == 32 * 100


class TestLayout:
    def test_goto_with_8_distractors_has_9_objects(self):
        cfg = EpisodeConfig(seed=3, num_distractors=8, task_families=(TaskFamily.GO_TO,))
        state, task = generate_episode(cfg)
        assert len(state.objects) == 9
        assert any(o.matches(*task.target_a) for o in state.objects)

    def test_unlock_has_locked_door_with_matching_key(self):
        for k in range(50):
            cfg = EpisodeConfig(
                seed=mix_seed(8, k), task_families=(TaskFamily.UNLOCK,), num_distractors=8
            )
            state, task = generate_episode(cfg)
            doors = [o for o in state.objects if o.kind is ObjectKind.DOOR]
            assert len(doors) == 1
            assert doors[0].door_state is DoorState.LOCKED
            assert state.is_wall(doors[0].position)
            assert any(
                o.kind is ObjectKind.KEY and o.color is doors[0].color
                for o in state.objects
            )

    def test_agent_on_free_interior_cell(self):
        for k in range(30):
            cfg = EpisodeConfig(seed=mix_seed(1, k), num_distractors=16)
            state, _ = generate_episode(cfg)
            assert state.is_interior(state.agent_pos)
            assert state.object_at(state.agent_pos) is None
            assert state.carried is None and state.step_count == 0

    def test_goto_never_spawns_facing_target(self):
        for k in range(100):
            cfg = EpisodeConfig(
                seed=mix_seed(2, k), num_distractors=8, task_families=(TaskFamily.GO_TO,)
            )
            state, task = generate_episode(cfg)
            faced = state.object_at(state.faced_cell())
            assert faced is None or not faced.matches(*task.target_a)

    def test_two_object_families_place_both_targets(self):
        for family in (
            TaskFamily.PUT_NEXT_TO,
            TaskFamily.PICK_UP_THEN_GO_TO,
            TaskFamily.PICK_UP_AFTER_PICK_UP,
        ):
            cfg = EpisodeConfig(seed=5, task_families=(family,), num_distractors=4)
            state, task = generate_episode(cfg)
            assert task.target_b is not None
            assert task.target_a != task.target_b
            assert any(o.matches(*task.target_a) for o in state.objects)
            assert any(o.matches(*task.target_b) for o in state.objects)

    def test_target_pool_restricts_goals(self):
        pool = ((ObjectKind.BALL, Color.GREEN), (ObjectKind.KEY, Color.RED))
        for k in range(20):
            cfg = EpisodeConfig(
                seed=mix_seed(3, k),
                task_families=(TaskFamily.GO_TO, TaskFamily.PICK_UP),
                target_pool=pool,
            )
            _, task = generate_episode(cfg)
            assert task.target_a in pool


class TestArticles:
    def test_unique_match_gets_definite_article(self):
        cfg = EpisodeConfig(seed=9, num_distractors=0, task_families=(TaskFamily.GO_TO,))
        _, task = generate_episode(cfg)
        assert task.article_a == "the"

    def test_duplicate_matches_get_indefinite_article(self):
        found = False
        for k in range(200):
            cfg = EpisodeConfig(
                seed=mix_seed(4, k), num_distractors=16, task_families=(TaskFamily.GO_TO,)
            )
            state, task = generate_episode(cfg)
            matches = sum(o.matches(*task.target_a) for o in state.objects)
            assert (task.article_a == "the") == (matches == 1)
            found = found or matches > 1
        assert found, "expected at least one duplicated goal descriptor"


class TestErrors:
    def test_room_too_small_for_objects(self):
        with pytest.raises(GenerationError, match="cannot hold"):
            generate_episode(EpisodeConfig(room_size=4, num_distractors=10))

    def test_empty_family_intersection(self):
        cfg = EpisodeConfig(task_families=(TaskFamily.GO_TO,))
        with pytest.raises(ValueError, match="no task families"):
            generate_episode(cfg, family_filter={TaskFamily.UNLOCK})

    def test_family_filter_selects_subset(self):
        cfg = EpisodeConfig(
            seed=12,
            task_families=(TaskFamily.GO_TO, TaskFamily.UNLOCK),
        )
        _, task = generate_episode(cfg, family_filter={TaskFamily.UNLOCK})
        assert task.family is TaskFamily.UNLOCK
