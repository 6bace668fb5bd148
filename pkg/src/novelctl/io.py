"""Matrix/vector CSV and JSON report helpers used by the CLI."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError


def read_matrix_csv(path) -> np.ndarray:
    """Row-major matrix; a non-numeric first row is treated as a header."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read matrix file {path}: {exc}") from exc
    if not rows:
        raise InvalidArgumentError(f"{path}: empty matrix file")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        data = [[float(c) for c in r] for r in rows]
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: non-numeric entry ({exc})") from exc
    if not data or len({len(r) for r in data}) != 1:
        raise InvalidArgumentError(f"{path}: ragged or empty matrix")
    M = np.array(data)
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError(f"{path}: non-finite entry")
    return M


def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([repr(float(x)) for x in row])


def write_trajectory_csv(path, t, X) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(X.shape[0])])
        for tk, col in zip(t, X.T):
            w.writerow([repr(float(tk))] + [repr(float(x)) for x in col])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
