"""CSV and manifest emission.

One file format for everything: '#'-prefixed metadata lines (key=value,
sorted keys), a header row, then numeric rows with 12 significant digits,
comma separated, LF line endings. Times in files are microseconds; the
library computes in seconds internally. Writes are atomic (temp file in
the target directory, then rename), so readers never see partial output.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .engine import SignalCurve
from .thermo import BetaTrajectory

CSV_FLOAT_FORMAT = "%.12g"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-csv-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)   # mkstemp defaults to owner-only
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_csv(columns: dict, meta: dict | None):
    names = list(columns)
    if not names:
        raise ValueError("need at least one column")
    arrays = [np.atleast_1d(np.asarray(columns[k], float)) for k in names]
    length = arrays[0].shape[0]
    for name, arr in zip(names, arrays):
        if arr.ndim != 1 or arr.shape[0] != length:
            raise ValueError(f"column {name!r} is not a 1-d array of "
                             f"length {length}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"column {name!r} contains non-finite values")
    lines = [f"# {key}={meta[key]}" for key in sorted(meta or {})]
    lines.append(",".join(names))
    for k in range(length):
        lines.append(",".join(CSV_FLOAT_FORMAT % arr[k] for arr in arrays))
    return "\n".join(lines) + "\n", length


def csv_text(columns: dict, meta: dict | None = None) -> str:
    """The CSV payload as a string (for stdout emission)."""
    return _build_csv(columns, meta)[0]


def write_csv(path: str, columns: dict, meta: dict | None = None) -> int:
    """Write named numeric columns with metadata; returns the row count."""
    text, length = _build_csv(columns, meta)
    _atomic_write(path, text)
    return length


def read_csv(path: str):
    """Inverse of write_csv: returns (meta, columns).

    Metadata values come back as strings; columns as float arrays.
    """
    meta = {}
    names = None
    rows = []
    with open(path, "r", newline="\n") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                continue
            if names is None:
                names = line.split(",")
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if names is None:
        raise ValueError(f"{path}: no header row")
    data = np.asarray(rows, float).reshape(len(rows), len(names))
    return meta, {name: data[:, k] for k, name in enumerate(names)}


def _flatten_meta(meta: dict) -> dict:
    return {str(k): str(v) for k, v in meta.items()}


def object_columns(obj):
    """(columns, meta) for a SignalCurve or BetaTrajectory.

    Signal curves get time_us/value columns (t1_us/amplitude for sweeps);
    trajectories get t1_us/beta. Object metadata rides along.
    """
    if isinstance(obj, SignalCurve):
        meta = {"label": curve_label(obj), "observable": obj.observable,
                "start_us": CSV_FLOAT_FORMAT % (obj.start * 1e6)}
        meta.update(_flatten_meta(obj.meta))
        times_us = np.asarray(obj.times, float) * 1e6
        if obj.label.endswith("-sweep"):
            return {"t1_us": times_us, "amplitude": obj.values}, meta
        return {"time_us": times_us, "value": obj.values}, meta
    if isinstance(obj, BetaTrajectory):
        meta = {"method": obj.method,
                "step_us": CSV_FLOAT_FORMAT % (obj.step * 1e6),
                "converged": str(obj.converged),
                "refinements": str(obj.refinements)}
        meta.update(_flatten_meta(obj.meta))
        return {"t1_us": np.asarray(obj.times, float) * 1e6,
                "beta": obj.beta}, meta
    raise TypeError(f"cannot emit {type(obj).__name__} as CSV")


def emit_csv(obj, path: str) -> int:
    """Write a SignalCurve or BetaTrajectory as CSV; returns the row count."""
    columns, meta = object_columns(obj)
    return write_csv(path, columns, meta)


def curve_label(curve: SignalCurve) -> str:
    return curve.label or "signal"


def manifest_path(out_path: str) -> str:
    return out_path + ".manifest.json"


def write_manifest(out_path: str, payload: dict) -> str:
    """Write the run manifest next to an output file; returns its path."""
    path = manifest_path(out_path)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True,
                                   default=str) + "\n")
    return path
