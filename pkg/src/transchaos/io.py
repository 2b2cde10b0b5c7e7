"""Plain-text output: CSV tables and reports stamped with the config hash and seed."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .space import GridFunction, Interpretation

__all__ = [
    "fmt",
    "header_line",
    "write_csv",
    "write_report",
    "read_csv",
    "grid_function_rows",
    "write_grid_function",
    "read_grid_function",
]


def fmt(x):
    """Render a cell: 12 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    if x is None:
        return ""
    return str(x)


def header_line(config_hash, seed):
    return f"# config_sha256={config_hash} seed={seed}"


def write_csv(path, columns, rows, config_hash=None, seed=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if config_hash is not None:
            fh.write(header_line(config_hash, seed) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if hasattr(obj, "value"):
        return obj.value
    return obj


def write_report(path, payload, config_hash=None, seed=None):
    """JSON body after a ``#`` header line; keys are sorted for stable diffs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    with path.open("w") as fh:
        if config_hash is not None:
            fh.write(header_line(config_hash, seed) + "\n")
        fh.write(body + "\n")
    return path


def read_csv(path):
    """``(columns, rows)`` with comment lines skipped and cells left as text."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [row for row in reader]


def grid_function_rows(f):
    return [(x, y) for x, y in f.rows()]


def write_grid_function(path, f, config_hash=None, seed=None):
    return write_csv(path, ("x", "value"), grid_function_rows(f), config_hash, seed)


def read_grid_function(path, interpretation=Interpretation.PIECEWISE_CONSTANT):
    """Read ``x, value`` rows written by :func:`write_grid_function`."""
    _, rows = read_csv(path)
    xs = np.array([float(r[0]) for r in rows])
    ys = np.array([float(r[1]) for r in rows])
    if xs.size < 2:
        raise ValueError("need at least two samples")
    step = xs[1] - xs[0]
    if not np.allclose(np.diff(xs), step, rtol=1e-9, atol=1e-12) or abs(xs[0]) > 1e-12:
        raise ValueError("samples must sit on a uniform grid starting at 0")
    step = float(f"{step:.12g}")
    return GridFunction(ys, step, Interpretation(interpretation))
