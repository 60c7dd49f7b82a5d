"""CSV trace and JSON report writers."""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .sim import RunReport, SimTrace

AXES = "xyz"


def trace_header(count: int, dim: int) -> list[str]:
    pos = [f"p_{i}_{AXES[a]}" for i in range(count) for a in range(dim)]
    inp = [f"u_{i}_{AXES[a]}" for i in range(count) for a in range(dim)]
    return ["k", *pos, *inp, "lambda2_exact", "lambda2_pred", "solver_status", "solve_ms",
            "min_margin", "slack_max"]


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    """One row per step; floats use ``repr`` so the file round-trips exactly."""
    path = Path(path)
    if not trace.records:
        count = 0 if trace.final_positions is None else trace.final_positions.shape[0]
    else:
        count = trace.records[0].positions.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(count, trace.dim))
        for r in trace.records:
            writer.writerow([r.k, *map(repr, r.positions.reshape(-1).tolist()),
                             *map(repr, r.u.reshape(-1).tolist()),
                             repr(r.lambda2_exact), repr(r.lambda2_pred), r.solver_status,
                             f"{r.solve_ms:.4f}", repr(r.min_margin), repr(r.slack_max)])
    return path


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a trace file; ``solver_status`` stays a string array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    cols = {}
    for key in rows[0]:
        values = [row[key] for row in rows]
        if key == "solver_status":
            cols[key] = np.array(values)
        elif key == "k":
            cols[key] = np.array(values, dtype=int)
        else:
            cols[key] = np.array(values, dtype=float)
    return cols


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_report_json(report: RunReport, config: ScenarioConfig, path: str | Path,
                      extra: dict | None = None) -> Path:
    path = Path(path)
    payload = {"config": _jsonable(config.to_dict()), "report": _jsonable(report)}
    if extra:
        payload.update(_jsonable(extra))
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
