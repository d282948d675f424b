"""CSV and JSON emission with a stable layout."""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: str | Path, columns: list[str], rows) -> Path:
    """RFC-4180 CSV, '.' decimals, full-precision floats, header always written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} cells for {len(columns)} columns")
            w.writerow([_cell(v) for v in row])
    return path


def write_columns(path, data: dict) -> Path:
    """CSV from equal-length 1-D arrays keyed by column name (insertion order)."""
    cols = list(data)
    arrays = [np.asarray(data[c]) for c in cols]
    n = {len(a) for a in arrays}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    return write_csv(path, cols, zip(*arrays) if arrays else [])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, Path):
        return str(v)
    return v


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=True) + "\n")
    return path


UNIT_RULES = (
    ("t", "time (units of 1/rate; c = 1)"),
    ("re_", "amplitude (dimensionless)"),
    ("im_", "amplitude (dimensionless)"),
    ("pop_", "probability"),
    ("photon_", "probability"),
    ("dp", "probability per unit time"),
    ("p", "probability"),
    ("sz", "dimensionless expectation"),
    ("mean_", "dimensionless expectation"),
    ("var_", "dimensionless variance"),
    ("stderr_", "dimensionless standard error"),
    ("deterministic_", "dimensionless expectation"),
)


def column_units(columns) -> dict:
    """Unit string for each CSV column name, by prefix."""
    out = {}
    for c in columns:
        for prefix, unit in UNIT_RULES:
            if c == prefix or (prefix != "t" and c.startswith(prefix)):
                out[c] = unit
                break
        else:
            out[c] = "dimensionless"
    return out


def csv_units(paths) -> dict:
    cols = {}
    for p in paths:
        p = Path(p)
        if p.suffix == ".csv":
            with open(p, newline="") as fh:
                header = next(csv.reader(fh), [])
            cols[p.name] = column_units(header)
    return cols


@dataclass
class RunManifest:
    name: str
    parameters: dict
    seeds: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    columns: dict = field(default_factory=dict)  # column -> unit
    version: str = __version__
    wall_clock: float = 0.0
    started: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))
    python: str = field(default_factory=platform.python_version)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def write(self, path) -> Path:
        return write_json(path, self.to_dict())
