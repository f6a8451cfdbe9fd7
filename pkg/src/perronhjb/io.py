"""Deterministic table and summary writers."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def to_jsonable(x):
    """Recursively convert numpy scalars and arrays; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    return x


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_table(stem, columns, rows, fmt: str = "csv") -> Path:
    """Write ``rows`` under ``columns`` to ``stem.csv`` or ``stem.json`` (``stem`` may contain dots)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    rows = [[_cell(v) for v in r] for r in rows]
    if fmt == "json":
        return write_json(stem.parent / (stem.name + ".json"), {"columns": list(columns), "rows": rows})
    path = stem.parent / (stem.name + ".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return path


def _cell(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def write_polyline(stem, points, fmt: str = "csv", columns=("y1", "y2", "y3")) -> Path:
    pts = np.atleast_2d(points)
    return write_table(stem, list(columns)[: pts.shape[1]], pts.tolist(), fmt)
