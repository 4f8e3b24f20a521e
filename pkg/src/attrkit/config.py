"""Declarative run configuration: one INI-style file with a flat section per
command, mirrored by CLI flags (flags win). Unknown sections or keys are
rejected so typos fail loudly instead of silently running defaults.

The config hash covers the computational parameters only (seeds, method
lists, numeric knobs) and deliberately excludes filesystem locations, so the
same experiment rerun into a different directory reproduces byte-identical
outputs.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, fields

from .attribution import METHOD_IDS
from .errors import ConfigError


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_str_list(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(s) for s in _parse_str_list(raw))


_PARSERS = {
    int: int,
    float: float,
    str: str,
    bool: _parse_bool,
    "str_list": _parse_str_list,
    "int_list": _parse_int_list,
}

# Fields whose values are filesystem locations; excluded from the config hash.
_PATH_FIELDS = {"out", "dataset_manifest", "explain_manifest", "model", "scores"}


@dataclass(frozen=True)
class GenDataConfig:
    command = "gen-data"
    seed: int = 0
    n_images: int = 100
    height: int = 32
    width: int = 32
    signal_area_fraction: float = 0.18
    jobs: int = 1
    out: str = "dataset"


@dataclass(frozen=True)
class ExplainConfig:
    command = "explain"
    seed: int = 0
    dataset_manifest: str = ""
    model: str = ""
    model_seed: int = 0
    model_id: str = ""
    methods: tuple[str, ...] = METHOD_IDS
    split: str = "test"
    ig_steps: int = 50
    gs_samples: int = 50
    gs_noise_std: float = 0.1
    fp_patch: int = 16
    fp_repeats: int = 5
    jobs: int = 1
    out: str = "explanations"


@dataclass(frozen=True)
class EvaluateConfig:
    command = "evaluate"
    seed: int = 0
    dataset_manifest: str = ""
    explain_manifest: str = ""
    seeds: tuple[int, ...] = ()  # empty = fall back to (seed,)
    images_per_seed: int = 0  # 0 = use every image once per seed
    epsilon: float = 1e-12
    jobs: int = 1
    out: str = "scores"


@dataclass(frozen=True)
class SanityConfig:
    command = "sanity"
    seed: int = 0
    dataset_manifest: str = ""
    model: str = ""
    model_seed: int = 0
    methods: tuple[str, ...] = METHOD_IDS
    split: str = "test"
    batch: int = 32
    n_layers: int = 10
    normalized: bool = True
    ig_steps: int = 50
    gs_samples: int = 50
    gs_noise_std: float = 0.1
    fp_patch: int = 16
    fp_repeats: int = 5
    jobs: int = 1
    out: str = "sanity"


@dataclass(frozen=True)
class CompareConfig:
    command = "compare"
    seed: int = 0
    scores: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()
    metrics: tuple[str, ...] = ("rra", "dpp")
    n_boot: int = 1000
    alpha: float = 0.05
    tie_tolerance: float = 1e-9
    jobs: int = 1
    out: str = "comparison"


_CONFIG_TYPES = {
    cls.command: cls
    for cls in (GenDataConfig, ExplainConfig, EvaluateConfig, SanityConfig, CompareConfig)
}

_FIELD_PARSERS = {
    "methods": "str_list",
    "metrics": "str_list",
    "labels": "str_list",
    "scores": "str_list",
    "seeds": "int_list",
}


def _known_fields(cls) -> dict[str, object]:
    table = {}
    for f in fields(cls):
        if f.name in _FIELD_PARSERS:
            table[f.name] = _PARSERS[_FIELD_PARSERS[f.name]]
        else:
            table[f.name] = _PARSERS[type(f.default)]
    return table


def load_config(command: str, config_path: str | None, overrides: dict) -> object:
    """Resolve the config for ``command``: defaults < file section < flags."""
    cls = _CONFIG_TYPES[command]
    parser_table = _known_fields(cls)
    values: dict[str, object] = {}
    if config_path:
        ini = configparser.ConfigParser()
        read = ini.read(config_path)
        if not read:
            raise ConfigError(f"config file not found: {config_path}")
        for section in ini.sections():
            if section not in _CONFIG_TYPES:
                raise ConfigError(f"unknown config section [{section}]")
        if ini.has_section(command):
            for key, raw in ini.items(command):
                if key not in parser_table:
                    raise ConfigError(f"unknown key {key!r} in section [{command}]")
                try:
                    values[key] = parser_table[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r} in [{command}]: {exc}") from exc
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in parser_table:
            raise ConfigError(f"unknown option {key!r} for command {command}")
        values[key] = value
    try:
        cfg = cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration for {command}: {exc}") from exc
    _validate(cfg)
    return cfg


def _validate(cfg) -> None:
    checks = {
        "seed": lambda v: v >= 0,
        "n_images": lambda v: v >= 1,
        "height": lambda v: v >= 2,
        "width": lambda v: v >= 2,
        "signal_area_fraction": lambda v: 0.0 < v < 1.0,
        "ig_steps": lambda v: v >= 1,
        "gs_samples": lambda v: v >= 1,
        "gs_noise_std": lambda v: v >= 0.0,
        "fp_patch": lambda v: v >= 1,
        "fp_repeats": lambda v: v >= 1,
        "jobs": lambda v: v >= 1,
        "batch": lambda v: v >= 2,
        "n_layers": lambda v: v >= 0,
        "n_boot": lambda v: v >= 1,
        "alpha": lambda v: 0.0 < v < 1.0,
        "images_per_seed": lambda v: v >= 0,
        "epsilon": lambda v: v > 0.0,
        "tie_tolerance": lambda v: v >= 0.0,
    }
    for f in fields(cfg):
        if f.name in checks and not checks[f.name](getattr(cfg, f.name)):
            raise ConfigError(f"{cfg.command}: value out of range for {f.name!r}: {getattr(cfg, f.name)}")
    for f in ("methods",):
        if hasattr(cfg, f):
            unknown = set(getattr(cfg, f)) - set(METHOD_IDS)
            if unknown:
                raise ConfigError(f"unknown method ids: {sorted(unknown)}")
            if not getattr(cfg, f):
                raise ConfigError("methods must not be empty")
    if hasattr(cfg, "metrics"):
        unknown = set(cfg.metrics) - {"rra", "p_pos", "p_neg", "dpp"}
        if unknown:
            raise ConfigError(f"unknown metrics: {sorted(unknown)}")
        if not cfg.metrics:
            raise ConfigError("metrics must not be empty")


def config_dict(cfg) -> dict:
    payload = {"command": cfg.command}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        payload[f.name] = list(value) if isinstance(value, tuple) else value
    return payload


def config_hash(cfg) -> str:
    payload = {
        k: v for k, v in config_dict(cfg).items() if k not in _PATH_FIELDS
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return digest[:12]
