"""Load and validate YAML/JSON experiment configuration files with command-line overrides."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import yaml
from pydantic import ValidationError

from critcycle.errors import ConfigError

from .schema import ExperimentConfig


def _read_file(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        elif path.suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(f"Unsupported config format: {path.suffix}. Use .yaml, .yml, or .json")
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Could not parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping, got {type(data).__name__}")
    return data


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply ``key=value`` overrides; values are parsed as YAML scalars or lists.

    Dotted keys reach into mappings, e.g. ``sweep.kappa_2tau=[0, 0.5, 1]``.
    """
    merged = dict(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"Override must look like key=value, got '{item}'")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Could not parse override value '{raw}': {exc}") from exc
        target = merged
        *parents, leaf = key.split(".")
        for part in parents:
            child = target.get(part)
            target[part] = dict(child) if isinstance(child, dict) else {}
            target = target[part]
        target[leaf] = value
    return merged


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Load an ExperimentConfig from an optional file plus overrides (overrides win)."""
    data = _read_file(path) if path is not None else {}
    data = apply_overrides(data, overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration:\n{exc}") from exc


def dump_config(config: ExperimentConfig) -> str:
    """Effective configuration as YAML."""
    data = config.model_dump(mode="json")
    data["fit_window"] = list(config.fit_window)
    return yaml.safe_dump(data, sort_keys=False)
