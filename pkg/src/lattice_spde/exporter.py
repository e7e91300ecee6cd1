"""Exporter module for field and report files.

Binary layout: a little-endian uint64 header (d, n, seed) followed by the
float64 values in C order. Fields on the interior carry (n-1)^d values,
noise realizations carry n^d.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .models import OutputFile

HEADER_DTYPE = np.dtype("<u8")
VALUE_DTYPE = np.dtype("<f8")
CSV_LIMIT = 4096


def ensure_dir(path: Path) -> None:
    """Create directory if it doesn't exist."""
    path.mkdir(parents=True, exist_ok=True)


def _result(path: Path) -> OutputFile:
    return OutputFile(name=path.name, path=path, size=path.stat().st_size)


def write_binary(path: Path, values: np.ndarray, d: int, n: int, seed: int) -> OutputFile:
    """Write the flat binary format."""
    ensure_dir(path.parent)
    header = np.array([d, n, seed], dtype=HEADER_DTYPE)
    payload = np.ascontiguousarray(values, dtype=VALUE_DTYPE)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(payload.tobytes(order="C"))
    return _result(path)


def read_binary(path: Path) -> tuple[dict, np.ndarray]:
    """Read a file written by ``write_binary``; values come back flat."""
    raw = Path(path).read_bytes()
    head = np.frombuffer(raw[: 3 * HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)
    values = np.frombuffer(raw[3 * HEADER_DTYPE.itemsize :], dtype=VALUE_DTYPE)
    d, n, seed = (int(v) for v in head)
    return {"d": d, "n": n, "seed": seed}, values.copy()


def field_frame(values: np.ndarray, offset: int = 0) -> pd.DataFrame:
    """One row per entry with index columns j1..jd and a value column."""
    idx = np.indices(values.shape).reshape(values.ndim, -1) + offset
    data = {f"j{k + 1}": idx[k] for k in range(values.ndim)}
    data["value"] = values.reshape(-1)
    return pd.DataFrame(data)


def write_field_csv(path: Path, values: np.ndarray, offset: int = 0) -> OutputFile:
    ensure_dir(path.parent)
    field_frame(values, offset).to_csv(path, index=False, float_format="%.17g")
    return _result(path)


def write_frame(path: Path, frame: pd.DataFrame) -> OutputFile:
    ensure_dir(path.parent)
    frame.to_csv(path, index=False, float_format="%.17g")
    return _result(path)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: Path, payload: dict) -> OutputFile:
    """Write sorted, indented JSON; non-finite floats become null."""
    ensure_dir(path.parent)
    text = json.dumps(_finite(payload), indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    return _result(path)


def _finite(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value
