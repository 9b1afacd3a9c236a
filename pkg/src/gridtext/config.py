"""Run configuration: one YAML document, environment-variable overrides.

Every training default mirrors the standard hyperparameter tables; the config
snapshot written into the run directory is sufficient to reproduce the run.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .env.types import ActionSpace, Color, EpisodeConfig, ObjectKind, TaskFamily
from .policy.distribution import Normalization, PolicyConfig, ScoringMode
from .training.losses import BCConfig, PPOConfig
from .training.optim import AdamConfig

ENV_PREFIX = "GRIDTEXT__"

TASK_PRESETS = {
    "goto": (TaskFamily.GO_TO,),
    "pickup": (TaskFamily.PICK_UP,),
    "putnext": (TaskFamily.PUT_NEXT_TO,),
    "unlock": (TaskFamily.UNLOCK,),
    "mix": (
        TaskFamily.GO_TO,
        TaskFamily.PICK_UP,
        TaskFamily.PUT_NEXT_TO,
        TaskFamily.PICK_UP_THEN_GO_TO,
        TaskFamily.GO_TO_AFTER_PICK_UP,
        TaskFamily.UNLOCK,
    ),
    "compose": (TaskFamily.PICK_UP_THEN_PICK_UP, TaskFamily.PICK_UP_AFTER_PICK_UP),
}


@dataclass(frozen=True)
class BackendConfig:
    mode: ScoringMode = ScoringMode.TOKEN_SCORING
    embed_dim: int = 64
    hidden_dim: int = 256
    value_embed_dim: int = 32
    value_hidden_dim: int = 64
    activation: str = "tanh"
    seed: int = 0


@dataclass(frozen=True)
class ServiceConfig:
    workers: int = 1  # in-process worker count when no addresses are given
    addresses: tuple[str, ...] = ()
    timeout_s: float = 60.0


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 1000
    seeds: tuple[int, ...] = (0, 1)
    greedy: bool = False


@dataclass(frozen=True)
class RunConfig:
    run_dir: str = "runs/default"
    master_seed: int = 0
    tasks: str = "goto"
    env: EpisodeConfig = field(default_factory=EpisodeConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    bc: BCConfig = field(default_factory=BCConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    checkpoint_every: int = 10

    def resolved_env(self) -> EpisodeConfig:
        if self.tasks not in TASK_PRESETS:
            raise ValueError(f"unknown task preset {self.tasks!r}; have {sorted(TASK_PRESETS)}")
        return replace(
            self.env, task_families=TASK_PRESETS[self.tasks], seed=self.master_seed
        )


_ENUMS = {
    "action_space": ActionSpace,
    "normalization": Normalization,
    "mode": ScoringMode,
}


def _coerce(cls, data: dict):
    kwargs: dict[str, Any] = {}
    field_types = {f.name: f.type for f in fields(cls)}
    for key, value in data.items():
        if key not in field_types:
            raise ValueError(f"unknown config key {key!r} for {cls.__name__}")
        if key in _ENUMS and isinstance(value, str):
            value = _ENUMS[key](value)
        elif key == "task_families":
            value = tuple(TaskFamily(v) for v in value)
        elif key == "target_pool" and value is not None:
            value = tuple((ObjectKind(k), Color(c)) for k, c in value)
        elif key in ("seeds", "addresses", "noop_displays") and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


_SECTIONS = {
    "env": EpisodeConfig,
    "backend": BackendConfig,
    "policy": PolicyConfig,
    "ppo": PPOConfig,
    "adam": AdamConfig,
    "bc": BCConfig,
    "service": ServiceConfig,
    "eval": EvalConfig,
}


def config_from_dict(data: dict) -> RunConfig:
    kwargs: dict[str, Any] = {}
    for key, value in (data or {}).items():
        if key in _SECTIONS:
            kwargs[key] = _coerce(_SECTIONS[key], value or {})
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ValueError(f"invalid config: {exc}") from exc


def _apply_env_overrides(data: dict, environ=os.environ) -> dict:
    """GRIDTEXT__section__key=value (or GRIDTEXT__key=value) overrides."""
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX) :].lower().split("__")
        value = yaml.safe_load(raw)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return data


def load_config(path: Optional[str] = None, environ=os.environ) -> RunConfig:
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text("utf-8"))
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ValueError("config file must hold a mapping")
            data = loaded
    return config_from_dict(_apply_env_overrides(data, environ))


def _to_plain(obj) -> Any:
    if hasattr(obj, "value") and isinstance(obj, (ActionSpace, Normalization, ScoringMode, TaskFamily, ObjectKind, Color)):
        return obj.value
    if isinstance(obj, tuple):
        return [_to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def save_config(config: RunConfig, path) -> None:
    doc = {k: _to_plain(v) for k, v in asdict(config).items()}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=True), "utf-8")
