"""INI-style configuration with documented defaults.

Example (every key optional)::

    [triage]
    coefficient_t = 0.4
    coefficient_i = 0.3
    coefficient_a = 0.3
    impact_saturation = 50
    age_saturation_hours = 72
    weight.electrical = 1.0

    [anomaly]
    subsample_size = 256
    tree_count = 100
    threshold_percentile = 95
    window_days = 7
    keywords = fire, flood, urgent

    [forecast]
    harmonics = 3
    period = 52
    z = 1.282
    steps = 8
    medium_threshold = 2
    high_threshold = 4

    [gatepass]
    key_env = HOSTEL_OPS_GATEPASS_KEY
    grace_minutes = 30

    [io]
    data_dir = .
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from datetime import timedelta
from pathlib import Path

from .anomaly import DEFAULT_KEYWORDS
from .errors import ConfigError
from .gatepass import KEY_ENV
from .triage import DEFAULT_TYPE_WEIGHTS, PriorityWeights


@dataclass
class TriageConfig:
    coefficient_t: float = 0.4
    coefficient_i: float = 0.3
    coefficient_a: float = 0.3
    impact_saturation: int = 50
    age_saturation_hours: float = 72.0
    type_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TYPE_WEIGHTS))

    def weights(self) -> PriorityWeights:
        return PriorityWeights(
            type_weights=dict(self.type_weights),
            coefficient_t=self.coefficient_t,
            coefficient_i=self.coefficient_i,
            coefficient_a=self.coefficient_a,
            age_saturation=timedelta(hours=self.age_saturation_hours),
            impact_saturation=self.impact_saturation,
        )


@dataclass
class AnomalyConfig:
    subsample_size: int = 256
    tree_count: int = 100
    threshold_percentile: float = 95.0
    window_days: float = 7.0
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS


@dataclass
class ForecastConfig:
    harmonics: int = 3
    period: float = 52.0
    z: float = 1.282
    steps: int = 8
    medium_threshold: float = 2.0
    high_threshold: float = 4.0


@dataclass
class GatepassConfig:
    key_env: str = KEY_ENV
    grace_minutes: float = 30.0

    def key(self) -> bytes | None:
        value = os.environ.get(self.key_env)
        return value.encode("utf-8") if value else None


@dataclass
class IOConfig:
    data_dir: str = "."


@dataclass
class Config:
    triage: TriageConfig = field(default_factory=TriageConfig)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    gatepass: GatepassConfig = field(default_factory=GatepassConfig)
    io: IOConfig = field(default_factory=IOConfig)


def _coerce(section: str, key: str, raw: str, current):
    try:
        if isinstance(current, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(t.strip() for t in raw.split(",") if t.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def load_config(path: str | Path | None = None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    sections = {f.name for f in fields(Config)}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown config section [{section}]")
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        for key, raw in parser.items(section):
            if section == "triage" and key.startswith("weight."):
                target.type_weights[key[len("weight."):]] = _coerce(section, key, raw, 0.0)
                continue
            if key not in known or key == "type_weights":
                raise ConfigError(f"unknown config key [{section}] {key}")
            setattr(target, key, _coerce(section, key, raw, getattr(target, key)))
    return cfg
