"""Zero-shot generalization suites: vocabulary shifts and task recompositions."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..env.types import Color, EpisodeConfig, ObjectKind, TaskFamily
from ..policy.vocab import Vocabulary
from ..rollout import Agent
from ..text.lexicon import Lexicon, default_lexicon
from ..text.substitution import apply_substitutions, builtin_table
from .harness import EvalReport, run_eval

TRAINING_MIX = (
    TaskFamily.GO_TO,
    TaskFamily.PICK_UP,
    TaskFamily.PUT_NEXT_TO,
    TaskFamily.PICK_UP_THEN_GO_TO,
    TaskFamily.GO_TO_AFTER_PICK_UP,
    TaskFamily.UNLOCK,
)

COMPOSE_FAMILIES = (
    TaskFamily.PICK_UP_THEN_PICK_UP,
    TaskFamily.PICK_UP_AFTER_PICK_UP,
)

# Goal descriptors excluded from training goals and evaluated zero-shot.
HELD_OUT_TARGETS = (
    (ObjectKind.BOX, Color.YELLOW),
    (ObjectKind.KEY, Color.RED),
    (ObjectKind.DOOR, Color.RED),
    (ObjectKind.BALL, Color.GREEN),
    (ObjectKind.DOOR, Color.GREY),
)


@dataclass(frozen=True)
class GeneralizationVariant:
    name: str
    table: Optional[str] = None  # builtin substitution table name
    task_families: Optional[tuple[TaskFamily, ...]] = None
    target_pool: Optional[tuple[tuple[ObjectKind, Color], ...]] = None


VARIANTS = (
    GeneralizationVariant("no_change"),
    GeneralizationVariant("oov_nouns", table="oov_nouns"),
    GeneralizationVariant("oov_adjectives", table="oov_adjectives"),
    GeneralizationVariant("invented", table="invented"),
    GeneralizationVariant("unseen_in_vocab", target_pool=HELD_OUT_TARGETS),
    GeneralizationVariant("compose_pickup", task_families=COMPOSE_FAMILIES),
    GeneralizationVariant("synonym_actions", table="synonym_actions"),
    GeneralizationVariant("french_full", table="french", task_families=(TaskFamily.GO_TO,)),
    GeneralizationVariant("french_actions_only", table="french_actions"),
)


def variant_by_name(name: str) -> GeneralizationVariant:
    for v in VARIANTS:
        if v.name == name:
            return v
    raise ValueError(f"unknown variant {name!r}; have {[v.name for v in VARIANTS]}")


def variant_setup(
    variant: GeneralizationVariant,
    base_config: EpisodeConfig,
    base_lexicon: Optional[Lexicon] = None,
) -> tuple[EpisodeConfig, Lexicon]:
    lexicon = base_lexicon if base_lexicon is not None else default_lexicon()
    if variant.table is not None:
        lexicon = apply_substitutions(lexicon, builtin_table(variant.table))
    config = base_config
    if variant.task_families is not None:
        config = replace(config, task_families=variant.task_families)
    if variant.target_pool is not None:
        config = replace(config, target_pool=variant.target_pool)
    return config, lexicon


@dataclass(frozen=True)
class VariantResult:
    variant: str
    report: EvalReport
    delta_vs_no_change: Optional[float]


def run_generalization_suite(
    agent_factory: Callable[[], Agent],
    base_config: EpisodeConfig,
    n_episodes: int,
    seeds: Sequence[int],
    vocab: Optional[Vocabulary] = None,
    variants: Sequence[GeneralizationVariant] = VARIANTS,
    base_lexicon: Optional[Lexicon] = None,
) -> dict[str, VariantResult]:
    """Evaluate each variant and report deltas against the no_change baseline."""
    results: dict[str, VariantResult] = {}
    baseline: Optional[float] = None
    ordered = sorted(variants, key=lambda v: v.name != "no_change")
    for variant in ordered:
        config, lexicon = variant_setup(variant, base_config, base_lexicon)
        report = run_eval(
            agent_factory(), config, n_episodes, seeds, lexicon=lexicon, vocab=vocab
        )
        if variant.name == "no_change":
            baseline = report.overall_sr
        delta = (
            report.overall_sr - baseline
            if baseline is not None and variant.name != "no_change"
            else None
        )
        results[variant.name] = VariantResult(variant.name, report, delta)
    return results


def write_suite_report(results: dict[str, VariantResult], out_dir) -> None:
    """JSON report plus a flat table (one row per variant x seed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        name: {
            "overall_sr": r.report.overall_sr,
            "ci_half_width": r.report.ci_half_width,
            "delta_vs_no_change": r.delta_vs_no_change,
            "per_task_sr": r.report.per_task_sr,
        }
        for name, r in results.items()
    }
    (out / "generalization.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True), "utf-8"
    )
    lines = ["variant\tseed\tsr"]
    for name, r in results.items():
        for seed, sr in r.report.per_seed_sr.items():
            lines.append(f"{name}\t{seed}\t{sr}")
    (out / "generalization.tsv").write_text("\n".join(lines) + "\n", "utf-8")
