"""Run configuration: one human-readable YAML file per run.

Every key has a printable default (`print-config`), values can be
overridden by a config file and then by TRAJICL_ environment variables
(``TRAJICL_TRAIN__SEED=3`` sets train.seed), so any reported number can be
traced back to an exact effective config.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..dataset import SequenceConfig
from ..gridworld import DynamicsConfig, TaskRole, TaskSpec, default_task_registry, load_task_registry
from ..model import ModelConfig, PRESETS, TrainConfig

ENV_PREFIX = "TRAJICL_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TasksConfig:
    registry: str | None = None          # YAML registry path; default catalog when None
    train: tuple[str, ...] | None = None  # task-id subset; role-based default when None
    test: tuple[str, ...] | None = None


@dataclass(frozen=True)
class DataConfig:
    levels_per_task: int = 500
    episodes_per_level: int = 5
    level_seed_base: int = 0
    sticky_prob: float = 0.0
    max_steps: int = 56
    crop_size: int = 9
    lava_lethal: bool = True

    def dynamics(self) -> DynamicsConfig:
        return DynamicsConfig(
            sticky_prob=self.sticky_prob,
            max_steps=self.max_steps,
            crop_size=self.crop_size,
            lava_lethal=self.lava_lethal,
        )


@dataclass(frozen=True)
class ModelSection:
    preset: str = "tiny"
    context_len: int = 192
    dropout: float = 0.1
    include_rewards: bool = False
    obs_embed_dim: int = 64
    num_layers: int | None = None    # explicit values override the preset
    d_model: int | None = None
    num_heads: int | None = None

    def model_config(self, obs_dim: int) -> ModelConfig:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown model preset {self.preset!r}; have {sorted(PRESETS)}")
        base = dict(PRESETS[self.preset])
        for key in ("num_layers", "d_model", "num_heads"):
            val = getattr(self, key)
            if val is not None:
                base[key] = val
        return ModelConfig(
            context_len=self.context_len,
            dropout=self.dropout,
            include_rewards=self.include_rewards,
            obs_embed_dim=self.obs_embed_dim,
            obs_dim=obs_dim,
            **base,
        )


@dataclass(frozen=True)
class EvalSection:
    tasks: tuple[str, ...] | None = None   # default: the registry's test tasks
    k_demos: tuple[int, ...] = (0, 1)
    episodes_per_level: int = 5
    num_levels: int = 20
    model_seeds: int = 3
    sticky_prob: float = 0.0
    decode_mode: str = "greedy"
    temperature: float = 1.0
    baseline: str = "transformer"          # transformer | hashmap | expert | random
    level_seed_base: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    out_dir: str = "runs/run"
    tasks: TasksConfig = field(default_factory=TasksConfig)
    data: DataConfig = field(default_factory=DataConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)

    # -- task resolution ---------------------------------------------------

    def registry(self) -> list[TaskSpec]:
        if self.tasks.registry is not None:
            return load_task_registry(self.tasks.registry)
        return default_task_registry()

    def train_tasks(self) -> list[TaskSpec]:
        specs = self.registry()
        if self.tasks.train is not None:
            by_id = {s.task_id: s for s in specs}
            return [by_id[t] for t in self.tasks.train]
        return [s for s in specs if s.role is TaskRole.TRAIN]

    def eval_tasks(self) -> list[TaskSpec]:
        specs = self.registry()
        wanted = self.eval.tasks if self.eval.tasks is not None else self.tasks.test
        if wanted is not None:
            by_id = {s.task_id: s for s in specs}
            return [by_id[t] for t in wanted]
        return [s for s in specs if s.role is TaskRole.TEST]


_SECTIONS = {
    "tasks": TasksConfig,
    "data": DataConfig,
    "sequence": SequenceConfig,
    "model": ModelSection,
    "train": TrainConfig,
    "eval": EvalSection,
}

_TUPLE_KEYS = {"train", "test", "tasks", "k_demos"}


def _coerce(cls, payload: dict):
    valid = {f.name for f in fields(cls)}
    unknown = set(payload) - valid
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    clean = {}
    for k, v in payload.items():
        if k in _TUPLE_KEYS and isinstance(v, list):
            v = tuple(v)
        clean[k] = v
    try:
        return cls(**clean)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = raw.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        kwargs[name] = _coerce(cls, section)
    for key in ("name", "out_dir"):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if raw:
        raise ConfigError(f"unknown top-level keys {sorted(raw)}")
    return RunConfig(**kwargs)


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def apply_env_overrides(raw: dict, environ=None) -> dict:
    """Fold TRAJICL_SECTION__KEY=value pairs into a raw config dict."""
    environ = os.environ if environ is None else environ
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for key, value in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        parsed = yaml.safe_load(value)
        if len(path) == 1:
            out[path[0]] = parsed
        else:
            node = out
            for part in path[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"env override {key}: {part} is not a section")
            node[path[-1]] = parsed
    return out


def load_config(path: str | Path | None, use_env: bool = True) -> RunConfig:
    raw = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config root must be a mapping")
        raw = loaded
    if use_env:
        raw = apply_env_overrides(raw)
    return config_from_dict(raw)


def dump_config(cfg: RunConfig) -> str:
    d = config_to_dict(cfg)
    # tuples serialize as lists for YAML readability
    def tuplefree(node):
        if isinstance(node, dict):
            return {k: tuplefree(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return [tuplefree(v) for v in node]
        return node
    return yaml.safe_dump(tuplefree(d), sort_keys=False)
