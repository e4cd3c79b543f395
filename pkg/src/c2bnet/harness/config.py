"""Declarative experiment configuration (JSON, or TOML on Python >= 3.11)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..grids import Grid
from ..model import STANDARDIZE_MODES
from ..pde.problems import PROFILES, get_problem
from ..train import TrainConfig

DEFAULT_N_VALUES = (36, 72, 108, 144, 225, 288, 360)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str
    n_values: list[int] = field(default_factory=lambda: list(DEFAULT_N_VALUES))
    trials: int = 3
    seed: int = 2024
    n_test: int = 200
    profile: str = "fast"
    d_low: int | None = None
    hidden: list[int] = field(default_factory=lambda: [100, 100, 100])
    metric: str | None = None
    noise_sigma: float = 0.0
    output_grid: dict | None = None
    transfer_grid: dict | None = None
    init_gain: float = 1.0
    latent_activation: str = "identity"
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune_train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=1e-2, max_epochs=20_000))
    compare_n_values: list[int] | None = None
    timings: bool = False
    workers: int = 1

    def __post_init__(self):
        try:
            prob = get_problem(self.problem)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.d_low is None:
            self.d_low = prob.d_low
        if self.metric is None:
            self.metric = prob.metric
        if isinstance(self.train, dict):
            self.train = _train_config(self.train, "train")
        if isinstance(self.finetune_train, dict):
            self.finetune_train = _train_config(self.finetune_train, "finetune_train")
        self.validate()

    def validate(self) -> None:
        ns = list(self.n_values)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise ConfigError("n_values must be a non-empty, strictly increasing list of positive counts")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_test < 1:
            raise ConfigError("n_test must be >= 1")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if self.metric not in ("l1", "l2"):
            raise ConfigError("metric must be 'l1' or 'l2'")
        if self.latent_activation not in ("relu", "identity"):
            raise ConfigError("latent_activation must be 'relu' or 'identity'")
        if self.train.standardize not in STANDARDIZE_MODES:
            raise ConfigError(f"train.standardize must be one of {STANDARDIZE_MODES}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.compare_n_values is not None:
            bad = [n for n in self.compare_n_values if n > ns[-1]]
            if bad:
                raise ConfigError(f"compare_n_values {bad} exceed the largest sweep size {ns[-1]}")
        for name in ("output_grid", "transfer_grid"):
            g = getattr(self, name)
            if g is not None:
                try:
                    Grid.from_dict(g)
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"invalid {name}: {exc}") from None

    @property
    def base_grid(self) -> Grid:
        return Grid.from_dict(self.output_grid) if self.output_grid else get_problem(self.problem).output_grid

    @property
    def fine_grid(self) -> Grid:
        if self.transfer_grid:
            return Grid.from_dict(self.transfer_grid)
        return get_problem(self.problem).transfer_grid

    @property
    def compare_sizes(self) -> list[int]:
        return list(self.compare_n_values) if self.compare_n_values else list(self.n_values)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _train_config(d: dict, where: str) -> TrainConfig:
    try:
        return TrainConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


# Per-problem defaults. The compare sizes keep the transfer study to the sizes the
# acceptance gate inspects.
_DEFAULTS = {
    "elliptic": dict(
        init_gain=1.0,
        train=TrainConfig(lr=1e-3),
        compare_n_values=[108, 360],
    ),
    "heat": dict(
        n_values=[36, 72, 108, 144, 225],
        init_gain=0.1,
        train=TrainConfig(lr=3e-4),
        compare_n_values=[108, 225],
    ),
    "rte": dict(
        n_values=[36, 72, 108, 144],
        init_gain=0.05,
        profile="paper",
        train=TrainConfig(lr=1e-3, standardize="grand"),
    ),
}


def default_config(problem: str, **overrides) -> ExperimentConfig:
    base = dict(_DEFAULTS.get(problem, {}))
    if "n_values" in overrides and "compare_n_values" not in overrides and "compare_n_values" in base:
        top = max(overrides["n_values"])
        base["compare_n_values"] = [n for n in base["compare_n_values"] if n <= top] or None
    base.update(overrides)
    return ExperimentConfig(problem=problem, **base)


def config_from_dict(d: dict) -> ExperimentConfig:
    if "problem" not in d:
        raise ConfigError("config needs a 'problem' field")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                raise ConfigError("TOML configs need Python >= 3.11; use JSON") from None
            d = tomllib.loads(text)
        else:
            d = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg = config_from_dict(d)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg
