"""Figure analogues of the study's plots, rendered from harness CSV files.

Each figure id names a fixed recipe: which CSV schema it needs, which grid
axis it walks, and how the axes are scaled. ``render`` validates inputs
before touching matplotlib and returns the exact data that was drawn so
tests can compare it against the report tool's numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import (
    CURVE_COLUMNS,
    EFFICIENCY_COLUMNS,
    MEASUREMENT_COLUMNS,
    RESULTS_COLUMNS,
    SchemaError,
    read_table,
    summarize_metric,
)

__all__ = ["FIGURE_IDS", "FigureSpec", "FigureData", "Line", "render"]


@dataclass(frozen=True)
class Line:
    label: str
    x: np.ndarray
    y: np.ndarray
    yerr: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FigureData:
    """Everything that ended up on the axes, for extraction and comparison."""

    figure_id: str
    lines: list
    histogram: Optional[np.ndarray] = None


@dataclass
class FigureSpec:
    figure_id: str
    inputs: list
    output_path: Optional[str] = None
    styling: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise SchemaError(
                f"unknown figure id {self.figure_id!r}; known: {', '.join(FIGURE_IDS)}")
        if not self.inputs:
            raise SchemaError("figure needs at least one input CSV")


# sweep figures: (axis column, x log-scale, y label)
_SWEEP_RECIPES = {
    "fig3a": ("n_sensors", False, "mean cosine similarity"),
    "fig3b": ("noise_variance", True, "mean cosine similarity"),
    "fig3c": ("rate_total", True, "mean cosine similarity"),
    "fig4": ("noise_variance", True, "mean cosine similarity"),
    "fig5": ("rate_total", True, "mean cosine similarity"),
    "fig6": ("n_groups", False, "mean cosine similarity"),
}

FIGURE_IDS = ("fig2",) + tuple(_SWEEP_RECIPES) + ("fig7",)


def _render_sweep(spec: FigureSpec, axes) -> FigureData:
    axis, log_x, y_label = _SWEEP_RECIPES[spec.figure_id]
    rows = read_table(spec.inputs[0], RESULTS_COLUMNS)
    # fig5 walks one axis per sparsity level; the others one line per algorithm
    if spec.figure_id == "fig5":
        for row in rows:
            row["series"] = f"{row['algorithm']} k={row['sparsity']}"
        curves = summarize_metric(rows, axis, group="series")
    else:
        curves = summarize_metric(rows, axis)
    lines = []
    for label, points in curves.items():
        x = np.array([p.x for p in points])
        y = np.array([p.mean for p in points])
        yerr = np.array([p.half_std for p in points])
        axes.errorbar(x, y, yerr=yerr, marker="o", capsize=3, label=label)
        lines.append(Line(label, x, y, yerr))
    if log_x:
        axes.set_xscale("log")
    axes.set_xlabel(axis)
    axes.set_ylabel(y_label)
    axes.set_ylim(0.0, 1.05)
    axes.legend()
    return FigureData(spec.figure_id, lines)


def _render_density_overlay(spec: FigureSpec, axes) -> FigureData:
    rows = read_table(spec.inputs[0], CURVE_COLUMNS)
    histogram = None
    if len(spec.inputs) > 1:
        measurement_rows = read_table(spec.inputs[1], MEASUREMENT_COLUMNS)
        histogram = np.array([r["y"] for r in measurement_rows])
        axes.hist(histogram, bins=spec.styling.get("bins", 80), density=True,
                  color="0.8", label="measurements")
    lines = []
    series = sorted({row["series"] for row in rows})
    for label in series:
        pts = [(row["y"], row["density"]) for row in rows if row["series"] == label]
        pts.sort()
        x = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        axes.plot(x, y, label=label)
        lines.append(Line(label, x, y))
    axes.set_xlabel("measurement value")
    axes.set_ylabel("density")
    axes.legend()
    return FigureData(spec.figure_id, lines, histogram)


def _render_efficiency(spec: FigureSpec, axes) -> FigureData:
    rows = read_table(spec.inputs[0], EFFICIENCY_COLUMNS)
    lines = []
    for sparsity in sorted({row["sparsity"] for row in rows}):
        pts = sorted((row["n_observations"], row["pooled_variance"])
                     for row in rows if row["sparsity"] == sparsity)
        x = np.array([p[0] for p in pts], dtype=float)
        y = np.array([p[1] for p in pts])
        label = f"k={sparsity}"
        axes.plot(x, y, marker="o", label=label)
        lines.append(Line(label, x, y))
    counts = np.array(sorted({float(row["n_observations"]) for row in rows}))
    reference = 1.0 / counts
    axes.plot(counts, reference, linestyle="--", color="k", label="reference 1/D")
    lines.append(Line("reference 1/D", counts, reference))
    axes.set_xscale("log")
    axes.set_yscale("log")
    axes.set_xlabel("observations D")
    axes.set_ylabel("variance of recovered rates")
    axes.legend()
    return FigureData(spec.figure_id, lines)


def render(spec: FigureSpec) -> FigureData:
    """Validate inputs, draw the figure, optionally write the image file.

    Raises :class:`SchemaError` before any file is written when the inputs
    do not match the figure's schema or hold no data.
    """
    figure, axes = plt.subplots(figsize=spec.styling.get("figsize", (6.0, 4.0)))
    try:
        if spec.figure_id == "fig2":
            data = _render_density_overlay(spec, axes)
        elif spec.figure_id == "fig7":
            data = _render_efficiency(spec, axes)
        else:
            data = _render_sweep(spec, axes)
        axes.set_title(spec.styling.get("title", spec.figure_id))
        if spec.output_path:
            figure.savefig(spec.output_path, dpi=spec.styling.get("dpi", 150),
                           bbox_inches="tight")
    finally:
        plt.close(figure)
    return data
