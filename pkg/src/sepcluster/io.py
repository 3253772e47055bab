"""File formats: matrix CSV / JSON, labels JSON, result and report files.

Every file written here can carry a ``meta`` block with the config hash and
seed that produced it. In CSV files the block goes in leading ``#`` lines.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .model import TargetClustering, build_target


def jsonable(obj):
    """Recursively convert numpy types to plain Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps(config).encode()).hexdigest()[:16]


def meta_block(config: dict | None, seed) -> dict:
    return {"config_hash": config_hash(config or {}), "seed": None if seed is None else int(seed)}


def write_json(path, obj, meta: dict | None = None) -> None:
    payload = dict(obj)
    if meta is not None:
        payload["meta"] = meta
    Path(path).write_text(json.dumps(jsonable(payload), sort_keys=True, indent=1, allow_nan=False) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# Matrices


def write_matrix_csv(path, M, meta: dict | None = None) -> None:
    """Rows as comma-separated values printed with 17 significant digits (lossless)."""
    M = np.asarray(M, dtype=float)
    with open(path, "w") as fh:
        for key, value in sorted((meta or {}).items()):
            fh.write(f"# {key}: {value}\n")
        for row in M:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    try:
        with open(path) as fh:
            rows = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not a text file") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        data = [[float(x) for x in row] for row in csv.reader(rows)]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise InputError(f"{path}: rows have differing lengths {sorted(widths)}")
    M = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{path}: non-finite entries")
    return M


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=float)
    return {"n": M.shape[0], "d": M.shape[1], "data": M.ravel().tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        n, d, data = int(obj["n"]), int(obj["d"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"matrix JSON needs n, d, data: {exc}") from exc
    if len(data) != n * d:
        raise InputError(f"matrix JSON has {len(data)} entries, expected {n}*{d}")
    return np.asarray(data, dtype=float).reshape(n, d)


def read_matrix(path) -> np.ndarray:
    """CSV, or the JSON wrapper when the file name ends in .json."""
    if str(path).endswith(".json"):
        return matrix_from_json(read_json(path))
    return read_matrix_csv(path)


# ---------------------------------------------------------------------------
# Labels


def write_labels(path, T: TargetClustering, meta: dict | None = None) -> None:
    write_json(path, T.to_json(), meta)


def read_labels(path) -> dict:
    """Raw labels JSON ({k, labels} plus optional keys such as delta_override)."""
    obj = read_json(path)
    if "labels" not in obj:
        raise InputError(f"{path}: missing 'labels'")
    return obj


def target_from_labels(A: np.ndarray, obj: dict) -> TargetClustering:
    labels = obj["labels"]
    if len(labels) != A.shape[0]:
        raise InputError(f"{len(labels)} labels for {A.shape[0]} rows")
    return build_target(A, labels, obj.get("k"))


__all__ = [
    "config_hash",
    "dumps",
    "jsonable",
    "matrix_from_json",
    "matrix_to_json",
    "meta_block",
    "read_json",
    "read_labels",
    "read_matrix",
    "read_matrix_csv",
    "target_from_labels",
    "write_json",
    "write_jsonl",
    "write_labels",
    "write_matrix_csv",
]
