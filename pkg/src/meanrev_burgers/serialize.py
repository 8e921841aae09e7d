"""CSV / JSON emission.  Floats are written with 17 significant digits so a
read-back reproduces every double exactly; files appear atomically."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .spectral_core import CoeffTrajectory, FourierState, GridFunction


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def coeff_csv(rows: list[tuple[float, np.ndarray]]) -> str:
    """``t,k,re,im`` rows for each ``(t, coeffs)`` pair."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "k", "re", "im"])
    for t, c in rows:
        N = (c.size - 1) // 2
        for k, v in zip(range(-N, N + 1), c):
            w.writerow([fmt(t), k, fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def trajectory_rows(traj: CoeffTrajectory, full: bool) -> list[tuple[float, np.ndarray]]:
    times = traj.times
    if full:
        return list(zip(times, traj.coeffs))
    return [(times[-1], traj.coeffs[-1])]


def read_coeff_csv(path: str) -> list[FourierState]:
    by_t: dict[str, dict[int, complex]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_t.setdefault(row["t"], {})[int(row["k"])] = complex(float(row["re"]), float(row["im"]))
    out = []
    for t, modes in by_t.items():
        N = max(modes)
        out.append(FourierState(np.array([modes[k] for k in range(-N, N + 1)]), float(t)))
    return out


def grid_csv(grid: GridFunction) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "alpha"])
    for x, v in zip(grid.nodes, grid.values):
        w.writerow([fmt(x), fmt(v)])
    return buf.getvalue()


def read_grid_csv(path: str) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "alpha"}:
        raise ValueError(f"{path}: expected header x,alpha")
    return GridFunction(np.array([float(r["alpha"]) for r in rows]))


def path_dump_csv(times, R, X, dB, L) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "step", "t", "R", "X", "dB", "logdens"])
    paths, n1 = R.shape
    for p in range(paths):
        for j in range(n1):
            db = fmt(dB[p, j]) if j < n1 - 1 else ""
            w.writerow([p, j, fmt(times[j]), fmt(R[p, j]), fmt(X[p, j]), db, fmt(L[p, j])])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    """Deterministic JSON; non-finite floats become ``null``."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
