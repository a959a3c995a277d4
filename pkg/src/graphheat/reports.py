"""CSV / JSON emitters. Row order and float formatting are deterministic."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

KERNEL_COLUMNS = ("t", "x", "y", "p", "truncation_error", "domain_tag")
SPECTRAL_COLUMNS = ("domain_tag", "lambda", "residual", "iterations")
BOUND_COLUMNS = ("theorem", "instance", "true_value", "bound_value", "slack", "passed", "lambda_mode", "parameters")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_kernel_csv(path, fields, label=lambda v: v):
    """One row per ``(t, x, y)`` in the supports of the given kernel fields."""
    rows = []
    for f in fields:
        for y, p in zip(f.support.tolist(), f.values.tolist()):
            rows.append((f.t, f.source, y, p, f.truncation_error, f.domain_tag))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    rows = [(t, label(x), label(y), p, e, tag) for t, x, y, p, e, tag in rows]
    return _write(path, KERNEL_COLUMNS, rows)


def write_spectral_csv(path, results):
    return _write(path, SPECTRAL_COLUMNS, [r.row() for r in results])


def bound_row(rep):
    return (
        rep.theorem,
        dumps(list(rep.instance)),
        rep.true_value,
        rep.bound_value,
        rep.slack,
        rep.passed,
        rep.lambda_mode,
        dumps(rep.parameters),
    )


def write_bounds_csv(path, reports):
    return _write(path, BOUND_COLUMNS, [bound_row(r) for r in reports])


def write_series_csv(path, header, rows):
    return _write(path, header, rows)


def summarize(reports) -> dict:
    """Pass/fail counts and worst slack per theorem."""
    out = {}
    for r in reports:
        s = out.setdefault(r.theorem, {"total": 0, "passed": 0, "failed": 0, "worst_slack": None})
        s["total"] += 1
        if r.passed:
            s["passed"] += 1
        else:
            s["failed"] += 1
        if s["worst_slack"] is None or r.slack < s["worst_slack"]:
            s["worst_slack"] = r.slack
    return out


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path
