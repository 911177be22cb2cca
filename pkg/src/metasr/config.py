"""Flat ``key = value`` configuration files.

Keys are the fields of :class:`TrainConfig` plus those of
:class:`GeneratorConfig`; ``#`` starts a comment.  Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .generator import GeneratorConfig
from .scales import as_scale, format_scale
from .trainer import TrainConfig

_TRAIN_KEYS = {f.name: f for f in dataclasses.fields(TrainConfig) if f.name != "model"}
_MODEL_KEYS = {f.name: f for f in dataclasses.fields(GeneratorConfig) if f.name != "init_seed"}
KNOWN_KEYS = sorted(set(_TRAIN_KEYS) | set(_MODEL_KEYS))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def parse_overrides(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} must look like key=value")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = value
    return out


def _convert(key: str, field: dataclasses.Field, raw: str, hints: dict):
    kind = hints[field.name]
    try:
        if key == "scales":
            scales = tuple(as_scale(s) for s in raw.split(",") if s.strip())
            if not scales or min(scales) < 1:
                raise ValueError("scales must be a non-empty list of values >= 1")
            return scales
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if raw.lower() in ("", "none"):
            return None
        return raw
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def build_config(values: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    train_hints = typing.get_type_hints(TrainConfig)
    model_hints = typing.get_type_hints(GeneratorConfig)
    train_kw, model_kw = {}, {}
    for key, raw in values.items():
        if key in _TRAIN_KEYS:
            train_kw[key] = _convert(key, _TRAIN_KEYS[key], raw, train_hints)
        elif key in _MODEL_KEYS:
            model_kw[key] = _convert(key, _MODEL_KEYS[key], raw, model_hints)
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        model = replace(base.model, **model_kw)
        cfg = replace(base, model=model, **train_kw)
        cfg.norm  # validates std
        cfg.loss_weights
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.total_updates < 0 or cfg.batch_size < 1 or cfg.p_lr < 1 or cfg.checkpoint_interval < 1:
        raise ConfigError("total_updates >= 0, batch_size >= 1, p_lr >= 1 and checkpoint_interval >= 1 are required")
    if not 0 < cfg.crop_fraction <= 1:
        raise ConfigError(f"crop_fraction must be in (0, 1], got {cfg.crop_fraction}")
    return cfg


def load_config(path=None, overrides: dict[str, str] | None = None) -> TrainConfig:
    values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    values.update(overrides or {})
    return build_config(values)


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for key in KNOWN_KEYS:
        value = getattr(cfg, key) if key in _TRAIN_KEYS else getattr(cfg.model, key)
        if key == "scales":
            value = ",".join(format_scale(s) for s in value)
        elif isinstance(value, Fraction):
            value = format_scale(value)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
