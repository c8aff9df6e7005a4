"""Command-line entry points: generate, recover, experiment, theory, report."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import configio
from .baselines import ALGORITHM_IDS
from .harness import (
    ExperimentConfig,
    cosine_similarity,
    evaluate_instance,
    export_measurements,
    export_mixture_curves,
    format_summary_table,
    read_instance,
    read_records,
    run_experiment,
    summarize,
    write_instance,
    write_summary,
)
from .model import GenerationConfig, generate_instance
from .solver import SporeConfig, write_trace_csv
from .theory import (
    collision_set,
    distinct_columns_check,
    nullspace_positive_check,
    onehot_singleton_exists,
)

USAGE_EXIT = 2


class CliError(Exception):
    """Argument or input-file problem; reported with usage and exit code 2."""


def _read_config_file(path) -> dict:
    if path is None:
        raise CliError("missing --config PATH")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}")
    return configio.parse_flat(p.read_text())


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--out", help="output path")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")


def _parse_matrix(text: str) -> np.ndarray:
    rows = [row.strip() for row in text.split(";") if row.strip()]
    return np.array([[float(v) for v in row.replace(",", " ").split()] for row in rows])


def cmd_generate(args) -> int:
    mapping = _read_config_file(args.config)
    config = GenerationConfig.from_mapping(mapping)
    if args.seed is not None:
        config.seed = args.seed
    if not args.out:
        raise CliError("generate needs --out PATH for the instance file")
    instance = generate_instance(config)
    write_instance(instance, args.out)
    print(f"wrote instance ({config.n_dims} dims, {config.n_observations} observations) to {args.out}")
    return 0


def cmd_recover(args) -> int:
    instance_path = Path(args.instance)
    if not instance_path.is_file():
        raise CliError(f"instance file not found: {instance_path}")
    if args.algorithm not in ALGORITHM_IDS:
        raise CliError(f"unknown algorithm {args.algorithm!r}; choose from {', '.join(ALGORITHM_IDS)}")
    if args.trace_out and args.algorithm != "spore":
        raise CliError("--trace-out applies to the spore algorithm only")
    instance = read_instance(instance_path)
    solver_mapping = configio.parse_flat(Path(args.config).read_text()) if args.config else {}
    spore_config = SporeConfig.from_mapping(solver_mapping) if solver_mapping else SporeConfig()
    rng = np.random.default_rng(args.seed)

    start = time.perf_counter()
    if args.algorithm == "spore":
        from .solver import run_spore

        solver_result = run_spore(instance.batch, instance.ensemble, spore_config, rng)
        rates_hat = solver_result.rates_hat.values
        details = {"n_iters": solver_result.n_iters,
                   "termination": solver_result.termination_reason}
        trace = solver_result.trace
    else:
        result = evaluate_instance(instance, args.algorithm, spore_config, rng)
        rates_hat = result.rates_hat
        details = result.details
        trace = None
    elapsed = time.perf_counter() - start

    cosine = cosine_similarity(rates_hat, instance.rates.values)
    print(f"algorithm: {args.algorithm}")
    print("rates_hat: " + " ".join(f"{v:.6g}" for v in rates_hat))
    print(f"cosine_similarity: {cosine:.6f}")
    print(f"wall_time_s: {elapsed:.3f}")
    for key, value in details.items():
        print(f"{key}: {value}")

    if args.trace_out and trace is not None:
        write_trace_csv(trace, args.trace_out)
        print(f"trace written to {args.trace_out}")
    if args.curve_out:
        export_mixture_curves(args.curve_out, instance,
                              {"estimate": rates_hat}, n_points=args.curve_points)
        print(f"curves written to {args.curve_out}")
    if args.measurements_out:
        export_measurements(args.measurements_out, instance.batch)
        print(f"measurements written to {args.measurements_out}")
    return 0


def cmd_experiment(args) -> int:
    mapping = _read_config_file(args.config)
    config = ExperimentConfig.from_mapping(mapping)
    if args.seed is not None:
        config.base_seed = args.seed
    destination = args.out or config.output_path
    if not destination:
        raise CliError("experiment needs --out PATH (or output_path in the config)")

    total = len(config.grid_points()) * config.n_trials
    done = [0]

    def progress(grid, trial):
        done[0] += 1
        print(f"\r{done[0]}/{total} cells", end="", file=sys.stderr, flush=True)

    records = run_experiment(config, destination, n_threads=args.threads, progress=progress)
    if total:
        print(file=sys.stderr)
    print(f"wrote {len(records)} records to {destination}")
    print(format_summary_table(summarize(records)))
    return 0


def cmd_theory(args) -> int:
    if args.phi:
        matrix = _parse_matrix(args.phi)
    elif args.random:
        m, n = (int(v) for v in args.random.split(","))
        matrix = np.random.default_rng(args.seed).random((m, n))
    else:
        raise CliError("theory needs --phi 'row;row' or --random M,N")
    report = {}
    report["n_sensors"], report["n_dims"] = matrix.shape
    report["nullspace_positive"] = nullspace_positive_check(matrix)
    report["distinct_columns"] = distinct_columns_check(matrix)
    if report["nullspace_positive"] and report["distinct_columns"]:
        index = onehot_singleton_exists(matrix, args.x_max)
        report["onehot_singleton_index"] = "none" if index is None else index
        zero = collision_set(matrix, np.zeros(matrix.shape[1], dtype=int), args.x_max)
        report["zero_collision_set_size"] = len(zero)
        report["zero_collision_box_complete"] = zero.box_complete
    lines = [f"{key}: {value}" for key, value in report.items()]
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.csv_out:
        import csv as _csv

        with Path(args.csv_out).open("w", newline="") as handle:
            writer = _csv.writer(handle)
            writer.writerow(["key", "value"])
            for key, value in report.items():
                writer.writerow([key, value])
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise CliError(f"results file not found: {path}")
    records = read_records(path)
    rows = summarize(records)
    print(format_summary_table(rows))
    if args.summary_out:
        write_summary(rows, args.summary_out)
        print(f"summary written to {args.summary_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmvp",
        description="Sparse Poisson rate recovery from grouped compressed measurements",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_generate = commands.add_parser("generate", help="sample an instance file from a config")
    _shared_flags(p_generate)
    p_generate.set_defaults(func=cmd_generate)

    p_recover = commands.add_parser("recover", help="run one algorithm on a stored instance")
    _shared_flags(p_recover)
    p_recover.add_argument("--instance", required=True, help="instance file path")
    p_recover.add_argument("--algorithm", required=True, help=f"one of {', '.join(ALGORITHM_IDS)}")
    p_recover.add_argument("--trace-out", help="CSV path for the solver trace")
    p_recover.add_argument("--curve-out", help="CSV path for exact density curves (M=1)")
    p_recover.add_argument("--measurements-out", help="CSV path for raw measurements (M=1)")
    p_recover.add_argument("--curve-points", type=int, default=1200)
    p_recover.set_defaults(func=cmd_recover)

    p_experiment = commands.add_parser("experiment", help="run a sweep from a config file")
    _shared_flags(p_experiment)
    p_experiment.set_defaults(func=cmd_experiment)

    p_theory = commands.add_parser("theory", help="run identifiability checks on a matrix")
    _shared_flags(p_theory)
    p_theory.add_argument("--phi", help="matrix literal: rows ';', entries ',' or spaces")
    p_theory.add_argument("--random", help="draw a uniform(0,1) matrix: M,N")
    p_theory.add_argument("--x-max", type=int, default=None, help="enumeration box cap")
    p_theory.add_argument("--csv-out", help="also write the report as key,value CSV")
    p_theory.set_defaults(func=cmd_theory)

    p_report = commands.add_parser("report", help="summarize a results CSV")
    _shared_flags(p_report)
    p_report.add_argument("--in", dest="input", required=True, help="results CSV path")
    p_report.add_argument("--summary-out", help="write the summary as CSV")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, configio.ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'mmvp {args.command} --help' for usage", file=sys.stderr)
        return USAGE_EXIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
