"""Run configuration files: versioned JSON with nested sections.

Every CLI command accepts --config; missing sections fall back to the desk
defaults below. The store root can also come from the SKETCHCONCEPT_STORE
environment variable.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..backbone.model import PretrainConfig
from ..trainer import AblationFlags, StageConfig

CONFIG_VERSION = 1

DESK_DEFAULTS: dict = {
    "version": CONFIG_VERSION,
    "pretrain": {"steps": 3500, "batch_size": 8, "lr": 2e-3, "seed": 0, "corpus_size": 256},
    "stage1": {"steps": 150, "batch_size": 3, "lr": 2e-2, "seed": 0, "augment": True},
    "stage2": {"steps": 150, "batch_size": 3, "lr": 2e-3, "seed": 0, "augment": True},
    "flags": {},
    "sampling": {"steps": 50},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Path | str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DESK_DEFAULTS))
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    return _merge(DESK_DEFAULTS, raw)


def _pick(d: dict, cls) -> dict:
    names = set(cls.__dataclass_fields__)
    unknown = set(d) - names - {"corpus_size"}
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return {k: v for k, v in d.items() if k in names}


def stage_config(cfg: dict, section: str, seed: int | None = None) -> StageConfig:
    data = _pick(cfg.get(section, {}), StageConfig)
    if seed is not None:
        data["seed"] = seed
    if "grad_clip" in data and data["grad_clip"] is not None:
        data["grad_clip"] = float(data["grad_clip"])
    return StageConfig(**data)


def pretrain_config(cfg: dict, seed: int | None = None) -> PretrainConfig:
    data = _pick(cfg.get("pretrain", {}), PretrainConfig)
    if seed is not None:
        data["seed"] = seed
    if "widths" in data:
        data["widths"] = tuple(data["widths"])
    return PretrainConfig(**data)


def ablation_flags(cfg: dict, extra: str = "") -> AblationFlags:
    data = {k: bool(v) for k, v in cfg.get("flags", {}).items()}
    flags = AblationFlags(**data) if data else AblationFlags()
    if extra:
        parsed = AblationFlags.parse(extra)
        merged = {
            name: getattr(flags, name) or getattr(parsed, name)
            for name in AblationFlags.__dataclass_fields__
        }
        flags = AblationFlags(**merged)
    return flags
