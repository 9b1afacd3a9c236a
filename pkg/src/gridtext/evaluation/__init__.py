"""Evaluation: success rates, confidence math, probes, generalization suites."""

from .generalization import (
    COMPOSE_FAMILIES,
    GeneralizationVariant,
    HELD_OUT_TARGETS,
    TRAINING_MIX,
    VARIANTS,
    VariantResult,
    run_generalization_suite,
    variant_by_name,
    variant_setup,
    write_suite_report,
)
from .harness import EvalReport, run_eval
from .metrics import CI_Z_99, ci_over_seeds, hoeffding_epsilon, sample_efficiency
from .probes import Probe, ProbeSeries, ProbeSet, default_probe_set, probe_distributions

__all__ = [
    "CI_Z_99",
    "COMPOSE_FAMILIES",
    "EvalReport",
    "GeneralizationVariant",
    "HELD_OUT_TARGETS",
    "Probe",
    "ProbeSeries",
    "ProbeSet",
    "TRAINING_MIX",
    "VARIANTS",
    "VariantResult",
    "ci_over_seeds",
    "default_probe_set",
    "hoeffding_epsilon",
    "probe_distributions",
    "run_eval",
    "run_generalization_suite",
    "sample_efficiency",
    "variant_by_name",
    "variant_setup",
    "write_suite_report",
]
