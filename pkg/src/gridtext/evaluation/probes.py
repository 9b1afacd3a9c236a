"""Fixed probe prompts: track how action probabilities evolve during training."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from ..policy.backends import ScorerBackend
from ..policy.distribution import (
    ActionDistribution,
    CandidateAction,
    PolicyConfig,
    action_distribution,
)


@dataclass(frozen=True)
class Probe:
    name: str
    prompt: str
    candidates: tuple[str, ...]


@dataclass(frozen=True)
class ProbeSet:
    probes: tuple[Probe, ...]

    def __post_init__(self):
        if not self.probes:
            raise ValueError("probe set must be non-empty")
        names = [p.name for p in self.probes]
        if len(set(names)) != len(names):
            raise ValueError("probe names must be unique")

    def __len__(self) -> int:
        return len(self.probes)

    @classmethod
    def load_dir(cls, path) -> "ProbeSet":
        probes = []
        for file in sorted(Path(path).glob("*.json")):
            doc = json.loads(file.read_text("utf-8"))
            probes.append(
                Probe(doc["name"], doc["prompt"], tuple(doc["candidates"]))
            )
        return cls(tuple(probes))


def default_probe_set() -> ProbeSet:
    root = resources.files("gridtext.evaluation").joinpath("data/probes")
    probes = []
    for file in sorted(root.iterdir(), key=lambda f: f.name):
        if file.name.endswith(".json"):
            doc = json.loads(file.read_text("utf-8"))
            probes.append(Probe(doc["name"], doc["prompt"], tuple(doc["candidates"])))
    return ProbeSet(tuple(probes))


def probe_distributions(
    backend: ScorerBackend,
    probes: ProbeSet,
    policy_config: PolicyConfig,
) -> dict[str, ActionDistribution]:
    out = {}
    for probe in probes.probes:
        candidates = tuple(
            CandidateAction(d, backend.vocab.encode(d)) for d in probe.candidates
        )
        out[probe.name] = action_distribution(
            backend, probe.prompt, candidates, policy_config
        )
    return out


class ProbeSeries:
    """Per-update time series of probe distributions, exportable as flat rows."""

    def __init__(self, probes: ProbeSet):
        self.probes = probes
        self.rows: list[dict] = []

    def record(self, update_index: int, backend: ScorerBackend, policy_config: PolicyConfig) -> dict:
        dists = probe_distributions(backend, self.probes, policy_config)
        summary = {}
        for probe in self.probes.probes:
            probs = dists[probe.name].probs
            for display, p in zip(probe.candidates, probs):
                self.rows.append(
                    {
                        "update": update_index,
                        "probe": probe.name,
                        "action": display,
                        "prob": float(p),
                    }
                )
            summary[f"probe/{probe.name}/argmax"] = probe.candidates[
                dists[probe.name].argmax()
            ]
        return summary

    def __len__(self) -> int:
        return len({row["update"] for row in self.rows})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            for row in self.rows:
                fp.write(json.dumps(row, sort_keys=True) + "\n")
