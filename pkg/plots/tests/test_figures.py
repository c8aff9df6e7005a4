import csv
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mmvp_plots.figures import FIGURE_IDS, FigureSpec, render
from mmvp_plots.schema import (
    RESULTS_COLUMNS,
    SchemaError,
    read_table,
    summarize_metric,
)

RESULT_DEFAULTS = {
    "n_dims": 20, "sparsity": 3, "rate_total": 2.0, "n_sensors": 10,
    "n_groups": 1, "n_observations": 100, "noise_variance": 1e-6,
    "trial": 0, "seed": 1, "algorithm": "spore", "cosine": 0.99,
    "mse": 0.001, "support_precision": 1.0, "support_recall": 1.0,
    "wall_time_s": 0.5, "n_iters": 1000, "termination": "converged",
    "rates_hat": "0.5;0.0;0.5", "rates_true": "0.5;0.0;0.5",
}


def write_results_csv(path, rows):
    with Path(path).open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULTS_COLUMNS)
        writer.writeheader()
        for overrides in rows:
            row = dict(RESULT_DEFAULTS)
            row.update(overrides)
            writer.writerow(row)


def sweep_rows(axis, values, algorithms=("spore", "l1_smv"), n_trials=3, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for value in values:
        for algorithm in algorithms:
            base = 0.95 if algorithm == "spore" else 0.7
            for trial in range(n_trials):
                rows.append({
                    axis: value,
                    "algorithm": algorithm,
                    "trial": trial,
                    "cosine": base + rng.uniform(-0.03, 0.03),
                })
    return rows


def write_curve_csv(path):
    grid = np.linspace(-0.5, 4.5, 100)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "y", "density"])
        for series, center in (("truth", 0.0), ("estimate", 0.1)):
            for y in grid:
                density = math.exp(-((y - center) ** 2) / 0.08)
                writer.writerow([series, repr(float(y)), repr(density)])


def write_measurements_csv(path, n=200):
    rng = np.random.default_rng(1)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["y"])
        for value in rng.normal(1.5, 1.0, n):
            writer.writerow([repr(float(value))])


def write_efficiency_csv(path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sparsity", "n_observations", "n_pooled",
                         "pooled_variance", "cr_bound", "variance_ratio"])
        for k in (1, 3):
            for d in (250, 1000):
                var = (1.2 + 0.8 * (k - 1)) / d
                writer.writerow([k, d, 10 * k, repr(var), repr(1.0 / d), repr(var * d)])


AXIS_BY_FIGURE = {
    "fig3a": ("n_sensors", [1, 2, 4, 10]),
    "fig3b": ("noise_variance", [1e-6, 1e-4, 1e-2, 1e-1]),
    "fig3c": ("rate_total", [2.0, 10.0, 50.0]),
    "fig4": ("noise_variance", [1e-3, 1e-2, 1e-1]),
    "fig6": ("n_groups", [1, 5, 20]),
}


@pytest.mark.parametrize("figure_id", sorted(AXIS_BY_FIGURE))
def test_sweep_figures_render(figure_id, tmp_path):
    axis, values = AXIS_BY_FIGURE[figure_id]
    results = tmp_path / "results.csv"
    write_results_csv(results, sweep_rows(axis, values))
    out = tmp_path / f"{figure_id}.png"
    data = render(FigureSpec(figure_id, [str(results)], str(out)))
    assert out.is_file() and out.stat().st_size > 0
    assert {line.label for line in data.lines} == {"spore", "l1_smv"}
    for line in data.lines:
        assert line.x.shape == (len(values),)
        assert np.all(np.diff(line.x) > 0)
        assert line.yerr is not None and np.all(line.yerr >= 0)


def test_fig5_groups_by_sparsity(tmp_path):
    rows = []
    for sparsity in (3, 5):
        for row in sweep_rows("rate_total", [1.0, 10.0], algorithms=("spore",)):
            row["sparsity"] = sparsity
            rows.append(row)
    results = tmp_path / "results.csv"
    write_results_csv(results, rows)
    data = render(FigureSpec("fig5", [str(results)], str(tmp_path / "fig5.png")))
    assert {line.label for line in data.lines} == {"spore k=3", "spore k=5"}


def test_fig2_overlay(tmp_path):
    curves = tmp_path / "curves.csv"
    measurements = tmp_path / "y.csv"
    write_curve_csv(curves)
    write_measurements_csv(measurements)
    out = tmp_path / "fig2.png"
    data = render(FigureSpec("fig2", [str(curves), str(measurements)], str(out)))
    assert out.is_file()
    assert {line.label for line in data.lines} == {"truth", "estimate"}
    assert data.histogram is not None and data.histogram.shape == (200,)


def test_fig7_includes_reference_line(tmp_path):
    efficiency = tmp_path / "eff.csv"
    write_efficiency_csv(efficiency)
    out = tmp_path / "fig7.png"
    data = render(FigureSpec("fig7", [str(efficiency)], str(out)))
    labels = [line.label for line in data.lines]
    assert labels == ["k=1", "k=3", "reference 1/D"]
    reference = data.lines[-1]
    assert np.allclose(reference.y, 1.0 / reference.x)


def test_empty_csv_rejected_no_file_written(tmp_path):
    results = tmp_path / "results.csv"
    write_results_csv(results, [])
    out = tmp_path / "fig3a.png"
    with pytest.raises(SchemaError):
        render(FigureSpec("fig3a", [str(results)], str(out)))
    assert not out.exists()


def test_missing_columns_listed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("algorithm,cosine\nspore,0.9\n")
    with pytest.raises(SchemaError) as excinfo:
        render(FigureSpec("fig3a", [str(bad)], str(tmp_path / "x.png")))
    assert "n_sensors" in str(excinfo.value)


def test_unknown_figure_id():
    with pytest.raises(SchemaError):
        FigureSpec("fig99", ["x.csv"])


def test_render_is_deterministic(tmp_path):
    axis, values = AXIS_BY_FIGURE["fig3a"]
    results = tmp_path / "results.csv"
    write_results_csv(results, sweep_rows(axis, values))
    a = render(FigureSpec("fig3a", [str(results)], str(tmp_path / "a.png")))
    b = render(FigureSpec("fig3a", [str(results)], str(tmp_path / "b.png")))
    for line_a, line_b in zip(a.lines, b.lines):
        assert line_a.label == line_b.label
        assert np.array_equal(line_a.x, line_b.x)
        assert np.array_equal(line_a.y, line_b.y)
        assert np.array_equal(line_a.yerr, line_b.yerr)


def test_summarize_metric_matches_hand_computation(tmp_path):
    rows = [
        {"algorithm": "a", "n_sensors": 1, "cosine": 0.5},
        {"algorithm": "a", "n_sensors": 1, "cosine": 0.7},
        {"algorithm": "a", "n_sensors": 2, "cosine": 0.9},
    ]
    curves = summarize_metric(rows, "n_sensors")
    points = curves["a"]
    assert points[0].mean == pytest.approx(0.6)
    assert points[0].half_std == pytest.approx(np.std([0.5, 0.7], ddof=1) / 2)
    assert points[1].half_std == 0.0


def _mmvp_cli_available() -> bool:
    try:
        probe = subprocess.run([sys.executable, "-m", "mmvp.cli", "--help"],
                               capture_output=True, text=True, timeout=60)
    except Exception:
        return False
    return probe.returncode == 0


@pytest.mark.skipif(not _mmvp_cli_available(), reason="recovery CLI not installed")
def test_plotted_values_match_report_summary(tmp_path):
    # the figure must draw exactly what the report tool summarizes
    axis, values = AXIS_BY_FIGURE["fig3a"]
    results = tmp_path / "results.csv"
    write_results_csv(results, sweep_rows(axis, values, n_trials=4, seed=3))
    summary = tmp_path / "summary.csv"
    run = subprocess.run(
        [sys.executable, "-m", "mmvp.cli", "report", "--in", str(results),
         "--summary-out", str(summary)],
        capture_output=True, text=True)
    assert run.returncode == 0, run.stderr

    with summary.open(newline="") as handle:
        reference = {
            (row["algorithm"], float(row["n_sensors"])):
                (float(row["mean_cosine"]), float(row["half_std_cosine"]))
            for row in csv.DictReader(handle)
        }
    data = render(FigureSpec("fig3a", [str(results)], str(tmp_path / "fig3a.png")))
    checked = 0
    for line in data.lines:
        for x, y, err in zip(line.x, line.y, line.yerr):
            mean_ref, half_std_ref = reference[(line.label, float(x))]
            assert abs(y - mean_ref) <= 1e-9
            assert abs(err - half_std_ref) <= 1e-9
            checked += 1
    assert checked == len(values) * 2


def test_cli_render(tmp_path, capsys):
    from mmvp_plots.cli import main

    axis, values = AXIS_BY_FIGURE["fig3a"]
    results = tmp_path / "results.csv"
    write_results_csv(results, sweep_rows(axis, values))
    out = tmp_path / "fig.png"
    assert main(["render", "--figure", "fig3a", "--in", str(results), "--out", str(out)]) == 0
    assert out.is_file()
    assert main(["render", "--figure", "fig7", "--in", str(results), "--out",
                 str(tmp_path / "no.png")]) == 2
    assert not (tmp_path / "no.png").exists()
