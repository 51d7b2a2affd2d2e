"""Experiment configuration: a flat key=value text format and its schema.

The file format is deliberately plain: one `key = value` per line, `#`
comments, numbers parsed by type, comma-separated lists for grids. Every
knob has a default, so an empty file is a valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
import types
import typing

from .newsvendor import MarketPrices
from .privacy import SCENARIOS

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_text", "load_config"]

_METRICS = ("dp", "ub")
_LAG_PRESETS = ("daily", "offset")
_BID_RULES = ("quantile", "ann")
_K_POLICIES = ("global", "calibrated")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # market prices (EUR/kWh)
    retail: float = 0.20
    wholesale: float = 0.10
    balance_sell: float = 0.04
    balance_buy: float = 0.18
    confidence: float = 0.95

    # forecast-market study
    n_consumers: int = 8
    population_seed: int = 2897
    noise_seed: int = 2
    gamma_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    scenarios: tuple[str, ...] = SCENARIOS
    metrics: tuple[str, ...] = _METRICS

    # quantile forecaster
    lag_preset: str = "daily"
    epochs: int = 20
    learning_rate: float = 1e-3
    hidden: int = 3
    k_f: float = 1.0
    forecaster_seed: int = 0
    bid_rule: str = "quantile"

    # data-market study
    data_csv: str | None = None
    reference_csv: str | None = None
    n_days: int = 28
    synthetic_seed: int = 0
    reference_seed: int = 1
    theta_points: int = 41
    theta_max_factor: float = 4.0
    n_trials: int = 50
    k_policy: str = "global"
    sensitivity_points: int = 10

    # privacy calibration
    epsilon: float = 1.0
    dp_delta: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError(f"confidence must lie in (0, 1), got {self.confidence}")
        if self.n_consumers < 1:
            raise ConfigError("n_consumers must be positive")
        if not self.gamma_grid or any(g < 0.0 for g in self.gamma_grid):
            raise ConfigError("gamma_grid must be a non-empty list of nonnegative values")
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad or not self.scenarios:
            raise ConfigError(f"scenarios must be drawn from {SCENARIOS}, got {bad or 'nothing'}")
        bad = [m for m in self.metrics if m not in _METRICS]
        if bad or not self.metrics:
            raise ConfigError(f"metrics must be drawn from {_METRICS}, got {bad or 'nothing'}")
        if self.lag_preset not in _LAG_PRESETS:
            raise ConfigError(f"lag_preset must be one of {_LAG_PRESETS}")
        if self.bid_rule not in _BID_RULES:
            raise ConfigError(f"bid_rule must be one of {_BID_RULES}")
        if self.k_policy not in _K_POLICIES:
            raise ConfigError(f"k_policy must be one of {_K_POLICIES}")
        for name in ("epochs", "hidden", "n_days", "theta_points", "n_trials", "sensitivity_points"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("learning_rate", "k_f", "theta_max_factor", "epsilon"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.dp_delta < 1.0:
            raise ConfigError(f"dp_delta must lie in (0, 1), got {self.dp_delta}")

    def prices(self) -> MarketPrices:
        return MarketPrices(
            retail=self.retail,
            wholesale=self.wholesale,
            balance_sell=self.balance_sell,
            balance_buy=self.balance_buy,
        )


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> value strings; comments and blank lines dropped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _coerce(name: str, value: str, hint) -> object:
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value.lower() == "none":
            return None
        return _coerce(name, value, args[0])
    if origin is tuple:
        item = typing.get_args(hint)[0]
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return tuple(_coerce(name, p, item) for p in parts)
    try:
        if hint is int:
            return int(value)
        if hint is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r} as {hint.__name__}") from None
    if hint is str:
        return value
    raise ConfigError(f"{name}: unsupported field type {hint!r}")


def config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    hints = typing.get_type_hints(ExperimentConfig)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    coerced = {k: _coerce(k, v, hints[k]) for k, v in mapping.items()}
    try:
        return ExperimentConfig(**coerced)
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a config file; relative data paths resolve against its folder."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    config = config_from_mapping(parse_config_text(path.read_text()))
    updates: dict[str, str] = {}
    for name in ("data_csv", "reference_csv"):
        value = getattr(config, name)
        if value is None:
            continue
        resolved = Path(value)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        if not resolved.exists():
            raise ConfigError(f"{name} points to a missing file: {resolved}")
        updates[name] = str(resolved)
    if updates:
        config = ExperimentConfig(**{**_as_dict(config), **updates})
    return config


def _as_dict(config: ExperimentConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(ExperimentConfig)}
