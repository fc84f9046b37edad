"""Deterministic CSV and JSON writers."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, is_dataclass

import numpy as np

# Fixed column names; units are part of the header.
TIME_SCALED = "time_scaled[1/gamma_s]"
TIME_SECONDS = "time_seconds[s]"
JX_NORM = "jx_norm[1]"
LEAKAGE = "leakage[1]"
CAVITY_N = "cavity_occupation[1]"
N_SPINS = "n_spins[1]"
NBAR = "nbar[1]"
T1_SCALED = "t1_eff_scaled[1/gamma_s]"
T1_SECONDS = "t1_eff_seconds[s]"
RESIDUAL = "residual_rms[1]"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def jsonable(obj):
    """Plain JSON types; NaN and infinities become null."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, data):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    text = json.dumps(jsonable(data), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def trajectory_rows(traj, extra=()):
    """Rows of (extra..., time_scaled, time_seconds, jx_norm, leakage)."""
    y = traj.jx_normalized
    for i, t in enumerate(traj.times):
        ts = None if traj.time_seconds is None else traj.time_seconds[i]
        leak = None if traj.leakage is None else traj.leakage[i]
        yield (*extra, t, ts, y[i], leak)


TRAJECTORY_HEADER = [TIME_SCALED, TIME_SECONDS, JX_NORM, LEAKAGE]
