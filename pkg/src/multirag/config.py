"""Engine configuration from file, environment, and flags.

Precedence, highest first: CLI flag, MULTIRAG_* environment variable,
config file value, built-in default.  The file is YAML with keys matching
EngineConfig fields plus a nested `providers` mapping.  Auth tokens are
never read from the file; provider configs name an environment variable
and the token is read from there at request time.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping

import yaml

from .errors import InvalidInputError
from .pipeline import EngineConfig, ProviderSpec

ENV_PREFIX = "MULTIRAG_"

# Scalar fields overridable from file, env, or flags, with their parsers.
_FIELD_PARSERS = {
    "store_root": str,
    "sampling_mode": str,
    "rate": float,
    "decimate": None,
    "cutoff": float,
    "chunk_size": int,
    "overlap_ratio": float,
    "default_k": int,
    "prompt_type": str,
    "decode_mode": str,
    "summary_interval": float,
    "describe_concurrency": int,
    "max_failure_ratio": float,
    "include_audio_in_summaries": None,
}

_BOOL_FIELDS = {name for name, parser in _FIELD_PARSERS.items() if parser is None}


def parse_bool(value: object, field: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise InvalidInputError(f"cannot read {value!r} as a boolean for {field}")


def _coerce(field: str, value: object):
    if field in _BOOL_FIELDS:
        return parse_bool(value, field)
    parser = _FIELD_PARSERS[field]
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad value {value!r} for {field}: {exc}") from exc


def _provider_specs(raw: object) -> dict[str, ProviderSpec]:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise InvalidInputError("providers section must be a mapping of role to settings")
    specs: dict[str, ProviderSpec] = {}
    for role, settings in raw.items():
        if not isinstance(settings, Mapping):
            raise InvalidInputError(f"provider {role!r} settings must be a mapping")
        options = dict(settings)
        kind = str(options.pop("kind", "mock"))
        specs[str(role)] = ProviderSpec(kind, options)
    return specs


def load_config_file(path: str | Path | None) -> dict:
    """Read the YAML config file into a flat values dict (empty if no path)."""
    if path is None:
        return {}
    source = Path(path)
    try:
        raw = yaml.safe_load(source.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidInputError(f"cannot parse config file {source}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise InvalidInputError(f"config file {source} must contain a mapping")
    values: dict = {}
    for key, value in raw.items():
        key = str(key)
        if key == "providers":
            values["providers"] = _provider_specs(value)
        elif key in _FIELD_PARSERS:
            values[key] = _coerce(key, value)
        else:
            raise InvalidInputError(f"unknown config key {key!r} in {source}")
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """MULTIRAG_<FIELD> variables for every scalar field."""
    env = os.environ if environ is None else environ
    values: dict = {}
    for field in _FIELD_PARSERS:
        raw = env.get(ENV_PREFIX + field.upper())
        if raw is not None:
            values[field] = _coerce(field, raw)
    return values


def build_engine_config(
    file_values: Mapping | None = None,
    env_values: Mapping | None = None,
    cli_values: Mapping | None = None,
) -> EngineConfig:
    """Merge the three layers (file lowest, CLI highest) into a config."""
    merged: dict = {}
    for layer in (file_values or {}, env_values or {}, cli_values or {}):
        merged.update({k: v for k, v in layer.items() if v is not None})
    return EngineConfig(**merged)


def resolve_config(
    config_path: str | Path | None = None,
    cli_values: Mapping | None = None,
    environ: Mapping[str, str] | None = None,
) -> EngineConfig:
    """The standard file < env < CLI pipeline in one call."""
    env = os.environ if environ is None else environ
    path = config_path if config_path is not None else env.get(ENV_PREFIX + "CONFIG")
    return build_engine_config(load_config_file(path), env_overrides(env), cli_values)
