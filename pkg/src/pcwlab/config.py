"""Run configuration: one YAML file with a section per pipeline stage."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .agents import GREEDY, STOCHASTIC, BiasScenario
from .datagen import GenConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    """Missing or invalid configuration key; ``key`` is the dotted path."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or min(self.hidden) <= 0:
            raise ValueError("hidden layer sizes must be positive")


@dataclass(frozen=True)
class EvalConfig:
    ac_mode: str = GREEDY
    shuffle: bool = False
    scenarios: dict = field(default_factory=lambda: {
        "mb_unbiased": {"mean_scale": 1.0, "noise_sd": 0.3},
        "mb_over": {"mean_scale": 1.2, "noise_sd": 0.3},
        "mb_under": {"mean_scale": 0.8, "noise_sd": 0.3},
    })

    def __post_init__(self):
        if self.ac_mode not in (GREEDY, STOCHASTIC):
            raise ValueError(f"ac_mode must be {GREEDY} or {STOCHASTIC}")
        for v in self.scenarios.values():
            BiasScenario(**v)

    def bias_scenarios(self) -> dict[str, BiasScenario]:
        return {k: BiasScenario(**v) for k, v in self.scenarios.items()}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data: GenConfig = field(default_factory=GenConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    out: str = "runs/default"

    def with_seed(self, seed: int) -> "RunConfig":
        """The global seed drives every stage."""
        return dataclasses.replace(
            self, seed=seed, data=dataclasses.replace(self.data, seed=seed),
            train=dataclasses.replace(self.train, seed=seed))

    def for_mode(self, mode: str) -> TrainConfig:
        return dataclasses.replace(self.train, reward_mode=mode)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["data"]["feature_weights"] = list(self.data.feature_weights)
        d["model"]["hidden"] = list(self.model.hidden)
        d["data"].pop("seed")
        d["train"].pop("seed")
        d["train"].pop("reward_mode")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {"data": GenConfig, "model": ModelConfig, "train": TrainConfig, "evaluation": EvalConfig}
_DERIVED = {"data": {"seed"}, "train": {"seed", "reward_mode"}}


def _section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)} - _DERIVED.get(name, set())
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
    defaults = cls()
    kwargs = {}
    for key, value in raw.items():
        want = type(getattr(defaults, key))
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if want in (tuple, list) and isinstance(value, list):
            value = tuple(value)
        if want is not dict and not isinstance(value, want if want is not tuple else (tuple, list)):
            raise ConfigError(f"{name}.{key}", f"expected {want.__name__}, got {type(value).__name__}")
        if want is int and isinstance(value, bool):
            raise ConfigError(f"{name}.{key}", "expected int, got bool")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(name, str(e)) from None


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for key in raw:
        if key not in ("seed", "out", *_SECTIONS):
            raise ConfigError(key, "unknown key")
    if "seed" not in raw:
        raise ConfigError("seed", "missing required key")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    out = raw.get("out", RunConfig.out)
    if not isinstance(out, str):
        raise ConfigError("out", "must be a path string")
    sections = {k: _section(k, cls, raw.get(k) or {}) for k, cls in _SECTIONS.items()}
    return RunConfig(seed, out=out, **sections).with_seed(seed)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError("<file>", f"malformed YAML: {e}") from None
    return config_from_dict(raw if raw is not None else {})
