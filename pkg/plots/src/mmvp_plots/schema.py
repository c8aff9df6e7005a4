"""CSV schemas produced by the experiment harness, and their validation.

This package talks to the recovery library exclusively through these files;
nothing here imports it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

RESULTS_COLUMNS = (
    "n_dims", "sparsity", "rate_total", "n_sensors", "n_groups",
    "n_observations", "noise_variance", "trial", "seed", "algorithm",
    "cosine", "mse", "support_precision", "support_recall", "wall_time_s",
    "n_iters", "termination", "rates_hat", "rates_true",
)
GRID_COLUMNS = RESULTS_COLUMNS[:7]

CURVE_COLUMNS = ("series", "y", "density")
MEASUREMENT_COLUMNS = ("y",)
EFFICIENCY_COLUMNS = ("sparsity", "n_observations", "n_pooled",
                      "pooled_variance", "cr_bound", "variance_ratio")

_NUMERIC = {
    "n_dims": int, "sparsity": int, "n_sensors": int, "n_groups": int,
    "n_observations": int, "trial": int, "seed": int, "n_pooled": int,
    "rate_total": float, "noise_variance": float, "cosine": float,
    "mse": float, "support_precision": float, "support_recall": float,
    "wall_time_s": float, "y": float, "density": float,
    "pooled_variance": float, "cr_bound": float, "variance_ratio": float,
}


class SchemaError(ValueError):
    """The CSV does not carry what the requested figure needs."""


def read_table(path, required_columns) -> list:
    """Rows as dicts with numeric fields parsed; header and rows validated."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"input file not found: {path}")
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        missing = [c for c in required_columns if c not in fields]
        if missing:
            raise SchemaError(
                f"{path} is missing required columns: {', '.join(missing)}")
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                caster = _NUMERIC.get(key)
                if caster is None:
                    row[key] = value
                elif value in ("", None):
                    row[key] = math.nan if caster is float else None
                else:
                    row[key] = caster(value)
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path} holds no data rows")
    return rows


@dataclass(frozen=True)
class SummaryPoint:
    """Mean and half-standard-deviation of one metric over paired trials."""

    x: float
    mean: float
    half_std: float
    n: int


def summarize_metric(rows, axis: str, metric: str = "cosine", group: str = "algorithm") -> dict:
    """Per-group curves of mean +- half-std along one grid axis.

    The aggregation matches the harness report: sample standard deviation
    (ddof 1) halved, zero when a cell holds a single trial.
    """
    cells: dict = {}
    for row in rows:
        cells.setdefault((row[group], row[axis]), []).append(row[metric])
    curves: dict = {}
    for (label, x), values in sorted(cells.items()):
        n = len(values)
        mean = sum(values) / n
        if n > 1:
            variance = sum((v - mean) ** 2 for v in values) / (n - 1)
            half_std = math.sqrt(variance) / 2.0
        else:
            half_std = 0.0
        curves.setdefault(label, []).append(SummaryPoint(x, mean, half_std, n))
    return curves
