import csv
import subprocess
import sys
from pathlib import Path

import pytest

from mmvp import configio
from mmvp.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_experiment_missing_config_exits_2(tmp_path, capsys):
    code = run_cli("experiment", "--out", str(tmp_path / "r.csv"))
    assert code == 2
    err = capsys.readouterr().err
    assert "usage" in err or "config" in err


def test_experiment_nonexistent_config_exits_2(tmp_path, capsys):
    code = run_cli("experiment", "--config", str(tmp_path / "missing.cfg"),
                   "--out", str(tmp_path / "r.csv"))
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_generate_and_recover_round_trip(tmp_path, capsys):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text(configio.format_flat({
        "n_dims": 3, "sparsity": 2, "rate_total": 1.0, "n_sensors": 1,
        "n_groups": 1, "n_observations": 200, "noise_variance": 0.02, "seed": 5,
    }))
    instance = tmp_path / "inst.txt"
    assert run_cli("generate", "--config", str(cfg), "--out", str(instance)) == 0
    capsys.readouterr()

    trace = tmp_path / "trace.csv"
    curves = tmp_path / "curves.csv"
    ys = tmp_path / "y.csv"
    solver_cfg = tmp_path / "solver.cfg"
    solver_cfg.write_text("max_iters = 400\nseed = 1\n")
    code = run_cli("recover", "--instance", str(instance), "--algorithm", "spore",
                   "--config", str(solver_cfg), "--seed", "2",
                   "--trace-out", str(trace), "--curve-out", str(curves),
                   "--measurements-out", str(ys))
    assert code == 0
    out = capsys.readouterr().out
    assert "rates_hat:" in out
    assert "cosine_similarity:" in out
    assert trace.is_file() and curves.is_file() and ys.is_file()
    header = trace.read_text().splitlines()[0]
    assert header == "iter,objective_estimate,step_norm,n_skipped,alpha"


def test_recover_unknown_algorithm_exits_2(tmp_path, capsys):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text(configio.format_flat({
        "n_dims": 3, "sparsity": 1, "rate_total": 1.0, "n_sensors": 1,
        "n_observations": 10, "noise_variance": 0.01, "seed": 1,
    }))
    instance = tmp_path / "inst.txt"
    run_cli("generate", "--config", str(cfg), "--out", str(instance))
    capsys.readouterr()
    code = run_cli("recover", "--instance", str(instance), "--algorithm", "nope")
    assert code == 2


def test_theory_command_reports_checks(tmp_path, capsys):
    csv_out = tmp_path / "theory.csv"
    code = run_cli("theory", "--phi", "1,2,3", "--csv-out", str(csv_out))
    assert code == 0
    out = capsys.readouterr().out
    assert "nullspace_positive: True" in out
    assert "distinct_columns: True" in out
    assert "onehot_singleton_index: 0" in out
    assert "zero_collision_set_size: 1" in out
    with csv_out.open() as handle:
        rows = {row["key"]: row["value"] for row in csv.DictReader(handle)}
    assert rows["nullspace_positive"] == "True"


def test_theory_rejects_missing_matrix(capsys):
    assert run_cli("theory") == 2


def test_experiment_and_report_pipeline(tmp_path, capsys):
    sweep = tmp_path / "sweep.cfg"
    sweep.write_text(configio.format_flat({
        "n_dims": 5, "sparsity": 2, "rate_total": 1.5, "n_sensors": "2, 3",
        "n_groups": 1, "n_observations": 20, "noise_variance": 0.01,
        "algorithms": "l1_smv, gm_smv", "n_trials": 2, "base_seed": 9,
    }))
    results = tmp_path / "results.csv"
    assert run_cli("experiment", "--config", str(sweep), "--out", str(results)) == 0
    capsys.readouterr()

    summary = tmp_path / "summary.csv"
    assert run_cli("report", "--in", str(results), "--summary-out", str(summary)) == 0
    out = capsys.readouterr().out
    assert "algorithm" in out
    with summary.open() as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4  # 2 grid points x 2 algorithms
    assert {row["algorithm"] for row in rows} == {"l1_smv", "gm_smv"}


def test_console_script_entrypoint(tmp_path):
    # the installed package exposes the CLI as `python -m mmvp.cli`
    result = subprocess.run([sys.executable, "-m", "mmvp.cli", "theory", "--phi", "1,2,3"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert "nullspace_positive: True" in result.stdout
