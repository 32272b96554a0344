"""Versioned CSV and JSON writers for run and sweep results."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

SCHEMA_VERSION = 1
RUN_COLUMNS = [
    "t",
    "g",
    "N",
    "purity",
    "s_mag",
    "theta",
    "Q_omega",
    "I_bound",
    "I_bound_approx",
    "var_minor",
    "var_major",
]


def schema_tag(kind: str) -> str:
    return f"critcycle.{kind}/{SCHEMA_VERSION}"


def write_csv(table: pd.DataFrame, path: Union[str, Path], kind: str) -> Path:
    """Write *table* with a leading ``# schema:`` line; read back with ``read_csv``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema: {schema_tag(kind)}\n")
        table.to_csv(handle, index=False, lineterminator="\n")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n", encoding="utf-8")
    return path
