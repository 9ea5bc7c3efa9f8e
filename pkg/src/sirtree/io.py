"""CSV and JSON writers for run artifacts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from .dynamics import Trajectory
from .model import EpidemicParams, total_infected_limit

TRAJECTORY_SIR_COLUMNS = ("t", "site", "S", "I", "R")
TRAJECTORY_KPP_COLUMNS = ("t", "site", "cumI")
STATIONARY_COLUMNS = ("site", "cumI_inf", "Itot")
SWEEP_COLUMNS = ("k", "lambda", "c_analytic", "gamma_star", "c_empirical", "rsq", "flag")


def fmt(value) -> str:
    """17 significant digits for floats, empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return "%.17g" % value
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trajectory_rows(traj: Trajectory):
    sites = traj.grid.sites
    if traj.kind == "sir":
        S, I, R = traj.fields["S"], traj.fields["I"], traj.fields["R"]
        for i, t in enumerate(traj.times):
            for j, site in enumerate(sites):
                yield t, site, S[i, j], I[i, j], R[i, j]
    else:
        cum = traj.fields["cum"]
        for i, t in enumerate(traj.times):
            for j, site in enumerate(sites):
                yield t, site, cum[i, j]


def trajectory_csv(traj: Trajectory) -> str:
    columns = TRAJECTORY_SIR_COLUMNS if traj.kind == "sir" else TRAJECTORY_KPP_COLUMNS
    return csv_text(columns, trajectory_rows(traj))


def stationary_csv(values, sites, p: EpidemicParams) -> str:
    values = np.asarray(values, dtype=float)
    itot = total_infected_limit(np.maximum(values, 0.0), p)
    return csv_text(STATIONARY_COLUMNS, zip(sites, values, np.atleast_1d(itot)))


def sweep_csv(rows) -> str:
    return csv_text(SWEEP_COLUMNS, ([r.get(c) for c in SWEEP_COLUMNS] for r in rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_text(path: str, text: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def output_path(prefix: Optional[str], name: str) -> Optional[str]:
    """``<prefix>_<name>``, or ``<prefix>/<name>`` when the prefix is a directory."""
    if prefix is None:
        return None
    if prefix.endswith(os.sep) or os.path.isdir(prefix):
        return os.path.join(prefix, name)
    return f"{prefix}_{name}"


def manifest(command: str, config_dict: dict, outputs: Sequence[str], version: str,
             extra: Optional[dict] = None) -> dict:
    out = {"tool": "sirtree", "version": version, "command": command,
           "config": config_dict, "outputs": list(outputs)}
    if extra:
        out.update(extra)
    return out
