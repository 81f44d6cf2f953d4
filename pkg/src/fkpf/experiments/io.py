"""CSV and JSON output for experiment runs.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly, so reading a file back recovers the computed values.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from ..bounds import deterioration_factor, naive_ratio
from .harness import AggregateMetrics

RMSE_COLUMNS = ("t", "mode", "rmse")
RMSAE_COLUMNS = ("t", "mode", "rmsae")
HANDOFF_COLUMNS = ("trial", "mode", "t", "checked", "delta", "from", "to", "values_transmitted")
DETERIORATION_COLUMNS = ("trial", "ratio", "compression_factor", "mode")
OVERLAY_COLUMNS = ("compression_factor", "theoretical_ratio", "naive_ratio")


def fmt(value) -> str:
    if isinstance(value, (bool, int, str)):
        return str(value)
    return format(float(value), ".17g")


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _label(m: AggregateMetrics) -> str:
    cfg = m.config
    if m.mode == "subsample":
        return f"subsample-Nb{cfg.N_b}"
    if m.mode == "parametric":
        return f"parametric-Np{cfg.N_p}"
    return m.mode


def overlay_row(m: AggregateMetrics) -> tuple | None:
    """Bound curve and naive curve at this run's compression factor (subsample runs only)."""
    cfg = m.config
    if m.mode != "subsample" or cfg.N % cfg.N_b:
        return None
    return (m.compression_factor, deterioration_factor(m.empirical_q, cfg.N // cfg.N_b, 2),
            naive_ratio(cfg.N, cfg.N_b))


def emit_results(metrics: Sequence[AggregateMetrics], path) -> dict[str, Path]:
    """Write the five result CSVs for one or more runs into directory ``path``.

    Rows follow the order of ``metrics``, then time or trial index.  An empty
    sequence produces header-only files.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "rmse": write_csv(out / "rmse.csv", RMSE_COLUMNS, (
            (t, _label(m), v) for m in metrics for t, v in enumerate(m.rmse))),
        "rmsae": write_csv(out / "rmsae.csv", RMSAE_COLUMNS, (
            (t, _label(m), v) for m in metrics for t, v in enumerate(m.rmsae))),
        "handoffs": write_csv(out / "handoffs.csv", HANDOFF_COLUMNS, (
            (trial, _label(m), *rec.row()) for m in metrics for trial, rec in m.handoffs)),
        "deterioration": write_csv(out / "deterioration.csv", DETERIORATION_COLUMNS, (
            (int(trial), r, m.compression_factor, _label(m))
            for m in metrics for trial, r in zip(m.trial_ids, m.deterioration_ratio))),
        "bound_overlay": write_csv(out / "bound_overlay.csv", OVERLAY_COLUMNS, (
            row for row in map(overlay_row, metrics) if row is not None)),
    }
    return files


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    return obj


def _recorded_config(m: AggregateMetrics) -> dict:
    # the worker count never changes results, so it is left out to keep outputs identical
    d = m.config.to_dict()
    d.pop("workers")
    return d


def write_run_config(metrics: Sequence[AggregateMetrics], path) -> Path:
    """Record every resolved configuration plus summary statistics as JSON."""
    doc = {
        "runs": [
            {
                "label": _label(m),
                "config": _recorded_config(m),
                "empirical_q": m.empirical_q,
                "compression_factor": m.compression_factor,
                "deterioration_quantiles": m.quantiles,
                "excluded_degenerate_trials": m.n_degenerate,
            }
            for m in metrics
        ]
    }
    p = Path(path)
    p.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    return p
