"""CSV and JSON writers (and the matching CSV reader).

Floats are written with ``repr`` so that reading a file back gives the
exact in-memory values. Files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .dynamics import SimulationResult
from .errors import UsageError
from .meanfield import MeanFieldTrajectory, ThresholdResult
from .sweep import SweepResult

logger = logging.getLogger(__name__)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_rows(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv_table(path: str | Path) -> tuple[list[str], list[list[float | None]]]:
    """Header and numeric rows of a CSV written by this module (empty cells are None)."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[None if cell == "" else float(cell) for cell in row] for row in r]
    return header, rows


def write_json(obj: dict, path: str | Path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def sweep_table(result: SweepResult) -> tuple[list[str], list[list]]:
    K = result.K
    fracs = [f"frac_{k + 1}" for k in range(K)]
    done = [p for p in result.points if p.skipped is None]
    if result.is_2d:
        header = ["axis1", "axis2", "winner", *fracs]
        rows = [[p.axis1, p.axis2, p.winner + 1, *p.fractions.tolist()] for p in done]
    else:
        header = ["rho", "beta", *fracs, "theory_threshold"]
        rows = [[p.axis1, p.beta, *p.fractions.tolist(), result.theory.get(p.beta)] for p in done]
    return header, rows


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    header, rows = sweep_table(result)
    if not rows:
        logger.warning("every grid point was skipped; %s has only a header", path)
    _write_rows(path, header, rows)


def sweep_summary(result: SweepResult) -> dict:
    points = []
    for p in result.points:
        entry = {"index": p.index, "beta": p.beta, "axis1": p.axis1, "axis2": p.axis2, "skipped": p.skipped}
        if p.skipped is None:
            entry.update(
                n_undecided=p.n_undecided,
                fractions=p.fractions.tolist(),
                fraction_min=p.fraction_min.tolist(),
                fraction_max=p.fraction_max.tolist(),
                winner=p.winner + 1,
                replicas=p.replicas,
                event_counts=list(p.event_counts),
            )
        points.append(entry)
    measured = {}
    if not result.is_2d:
        for beta in sorted(result.theory):
            value, step = result.measured_threshold(beta)
            measured[repr(beta)] = {"threshold": value, "grid_step": step}
    return {
        "parameters": result.parameters,
        "axis1": result.axis1_label,
        "axis2": result.axis2_label,
        "k_star": result.k_star + 1,
        "theory_threshold": {repr(b): t for b, t in sorted(result.theory.items())},
        "measured_threshold": measured,
        "points": points,
    }


def write_sweep(result: SweepResult, directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    csv_path = d / ("heatmap.csv" if result.is_2d else "sweep.csv")
    write_sweep_csv(result, csv_path)
    json_path = d / "sweep.json"
    write_json(sweep_summary(result), json_path)
    return [csv_path, json_path]


def write_trajectory_csv(times, h, path: str | Path) -> None:
    h = np.asarray(h)
    header = ["time", *[f"h_{k + 1}" for k in range(h.shape[1])]]
    _write_rows(path, header, [[t, *row.tolist()] for t, row in zip(np.asarray(times).tolist(), h)])


def emit_outputs(result, fmt: str, path: str | Path) -> None:
    """Write ``result`` (sweep, simulation, threshold report or mean-field series) as ``fmt``."""
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown output format {fmt!r} (expected 'csv' or 'json')")
    if isinstance(result, SweepResult):
        if fmt == "csv":
            write_sweep_csv(result, path)
        else:
            write_json(sweep_summary(result), path)
    elif isinstance(result, SimulationResult):
        if fmt == "csv":
            write_trajectory_csv(result.trajectory_time, result.trajectory_h, path)
        else:
            write_json(result.to_dict(), path)
    elif isinstance(result, ThresholdResult):
        if fmt != "json":
            raise UsageError("threshold reports are written as json")
        write_json(result.to_dict(), path)
    elif isinstance(result, MeanFieldTrajectory):
        if fmt != "csv":
            raise UsageError("mean-field trajectories are written as csv")
        write_trajectory_csv(np.arange(len(result.h)), result.h, path)
    else:
        raise UsageError(f"cannot emit {type(result).__name__}")

