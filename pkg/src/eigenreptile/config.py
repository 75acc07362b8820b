"""Run configuration: a JSON document validated against ``RunConfig``.

Unknown keys are rejected at every level so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .ispl import ISPLConfig
from .meta import MetaConfig
from .nn import OptimizerState
from .tasks import ClassificationConfig, NoiseSpec

TASK_FAMILIES = ("sine", "synthetic-cls", "episode-dir")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSection:
    kind: str = "none"
    p: float = 0.0
    pairing_seed: int = 0


@dataclass(frozen=True)
class ISPLSection:
    enabled: bool = False
    Q: int = 2
    gamma0: float = 10.0
    mu: float = 0.6
    period: int = 1000
    prior_fraction: float = 0.5
    prior_steps: int | None = None
    schedule: str = "outer-period"


@dataclass(frozen=True)
class RunConfig:
    task_family: str = "sine"
    episode_dir: str | None = None

    algorithm: str = "eigen-reptile"
    beta: float = 0.1
    beta_schedule: str = "linear-decay"
    meta_batch: int = 10
    inner_steps: int = 5
    outer_iterations: int = 1000
    project_before_flip: bool = False

    hidden_sizes: list[int] = field(default_factory=lambda: [64, 64])
    activation: str = "tanh"

    N: int = 5
    K_train: int = 10
    K_test: int = 1
    eval_K_train: int | None = None
    input_dim: int = 16
    radius: float = 3.0

    inner_optimizer: str = "sgd"
    inner_lr: float = 0.02
    adam_beta1: float = 0.0
    eval_adapt_steps: int = 32

    noise: NoiseSection = NoiseSection()
    ispl: ISPLSection = ISPLSection()

    seed: int = 0
    eval_interval: int = 100
    eval_task_count: int = 100
    output_dir: str = "runs/default"
    threads: int = 1

    # cheap derived views; constructing them also validates the values
    def meta_config(self, algorithm=None) -> MetaConfig:
        return MetaConfig(
            algorithm=algorithm or self.algorithm,
            beta=self.beta,
            meta_batch=self.meta_batch,
            inner_steps=self.inner_steps,
            outer_iterations=self.outer_iterations,
            beta_schedule=self.beta_schedule,
            project_before_flip=self.project_before_flip,
        )

    def optimizer(self) -> OptimizerState:
        return OptimizerState(self.inner_optimizer, self.inner_lr, beta1=self.adam_beta1)

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.noise.kind, self.noise.p, self.noise.pairing_seed)

    def ispl_config(self) -> ISPLConfig | None:
        if not self.ispl.enabled:
            return None
        kw = dataclasses.asdict(self.ispl)
        kw.pop("enabled")
        return ISPLConfig(**kw)

    def train_task_config(self) -> ClassificationConfig:
        return ClassificationConfig(self.N, self.K_train, self.K_test, self.input_dim, self.radius)

    def eval_task_config(self) -> ClassificationConfig:
        shots = self.K_train if self.eval_K_train is None else self.eval_K_train
        return ClassificationConfig(self.N, shots, self.K_test, self.input_dim, self.radius)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"noise": NoiseSection, "ispl": ISPLSection}


def _check_type(name, value, annotation):
    text = str(annotation)
    if value is None:
        if "None" not in text:
            raise ConfigError(f"{name}: null is not allowed")
        return
    if text.startswith("bool"):
        ok = isinstance(value, bool)
    elif text.startswith("int"):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif text.startswith("float"):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif text.startswith("str"):
        ok = isinstance(value, str)
    elif text.startswith("list"):
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{name}: expected {text}, got {value!r}")


def _build(cls, data: dict, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is RunConfig:
            kwargs[key] = _build(_SECTIONS[key], value, prefix=f"{key}.")
        else:
            _check_type(prefix + key, value, fields[key].type)
            kwargs[key] = float(value) if str(fields[key].type).startswith("float") else value
    return cls(**kwargs)


def validate(cfg: RunConfig) -> RunConfig:
    """Semantic checks beyond types; raises ConfigError."""
    try:
        if cfg.task_family not in TASK_FAMILIES:
            raise ValueError(f"task_family must be one of {TASK_FAMILIES}")
        if cfg.task_family == "episode-dir" and not cfg.episode_dir:
            raise ValueError("episode-dir runs need episode_dir")
        if any(h <= 0 for h in cfg.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if cfg.eval_interval < 0 or cfg.eval_task_count < 0 or cfg.eval_adapt_steps < 0:
            raise ValueError("evaluation settings must be nonnegative")
        if cfg.threads < 1:
            raise ValueError("threads must be >= 1")
        if cfg.task_family == "sine" and cfg.noise.kind != "none":
            raise ValueError("label noise applies to classification task families only")
        cfg.meta_config()
        cfg.optimizer()
        cfg.noise_spec()
        cfg.ispl_config()
        if cfg.task_family != "sine":
            cfg.train_task_config()
            cfg.eval_task_config()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg


def from_dict(data: dict) -> RunConfig:
    try:
        cfg = _build(RunConfig, data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return from_dict(data)
