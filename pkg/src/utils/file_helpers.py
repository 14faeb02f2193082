"""
File helper functions for FlexPlanner.

JSON documents go through pydantic models; tabular inputs and outputs
(price forecasts, activation signals, sweep grids, traces, tables) through pandas.
"""

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.core.errors import ScenarioError

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_json(path: PathLike) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"File not found: {path}", problems=[f"/: file {path} does not exist"])
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Invalid JSON in {path}: {e}", problems=[f"/: {e.msg} (line {e.lineno})"])


def write_json(path: PathLike, document: dict) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(json.dumps(document, indent=2, sort_keys=False) + "\n")
    log.info("Wrote %s", path)
    return path


def read_table(path: PathLike, required: tuple[str, ...] = ()) -> pd.DataFrame:
    """CSV with a header row; raises ScenarioError when a required column is missing."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"File not found: {path}")
    df = pd.read_csv(path)
    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ScenarioError(f"{path}: missing column(s) {', '.join(missing)}")
    return df


def write_table(path: PathLike, df: pd.DataFrame, float_format: str = "%.6f") -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
    log.info("Wrote %s (%d rows)", path, len(df))
    return path


def read_column(path: PathLike) -> np.ndarray:
    """One float per line, no header."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"File not found: {path}")
    df = pd.read_csv(path, header=None)
    if df.shape[1] != 1:
        raise ScenarioError(f"{path}: expected one value per line, found {df.shape[1]} columns")
    values = pd.to_numeric(df.iloc[:, 0], errors="coerce").to_numpy(dtype=float)
    if np.any(np.isnan(values)):
        raise ScenarioError(f"{path}: non-numeric entry at line {int(np.flatnonzero(np.isnan(values))[0]) + 1}")
    return values


def write_column(path: PathLike, values) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    pd.DataFrame({"w": np.asarray(values, dtype=float)}).to_csv(
        path, index=False, header=False, float_format="%.9f", lineterminator="\n"
    )
    return path
