"""Config-driven experiment harness: paired trials, metrics, CSV persistence.

Every (grid point, trial) pair maps to one generated instance whose seed is a
stable hash of the base seed and the grid coordinates, so adding or removing
algorithms never changes the instances, and every algorithm at a grid point
sees identical data. Records land in a fixed-schema CSV that the report and
plotting tools consume without any side channel.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import configio
from .baselines import ALGORITHM_IDS, OracleKnowledge, RecoveryResult, recover
from .likelihood import LatticeBound, mixture_density_curve
from .model import (
    GeneratedInstance,
    GenerationConfig,
    MeasurementBatch,
    PoissonRates,
    SensingEnsemble,
    SignalMatrix,
    generate_instance,
)
from .solver import SporeConfig

__all__ = [
    "cosine_similarity",
    "mean_squared_error",
    "support_metrics",
    "derive_seed",
    "ExperimentConfig",
    "TrialRecord",
    "CSV_COLUMNS",
    "run_experiment",
    "write_records",
    "read_records",
    "SummaryRow",
    "summarize",
    "write_summary",
    "EfficiencyRow",
    "efficiency_study",
    "write_efficiency",
    "write_instance",
    "read_instance",
    "export_mixture_curves",
    "export_measurements",
]

GRID_COLUMNS = (
    "n_dims",
    "sparsity",
    "rate_total",
    "n_sensors",
    "n_groups",
    "n_observations",
    "noise_variance",
)

CSV_COLUMNS = GRID_COLUMNS + (
    "trial",
    "seed",
    "algorithm",
    "cosine",
    "mse",
    "support_precision",
    "support_recall",
    "wall_time_s",
    "n_iters",
    "termination",
    "rates_hat",
    "rates_true",
)

# detection threshold for support metrics: an order of magnitude above the
# solver's clip floor separates floored coordinates from live ones
SUPPORT_THRESHOLD_FACTOR = 10.0

INSTANCE_MAGIC = "mmvp-instance 1"


# ---------------------------------------------------------------------------
# metrics


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors; nan when either norm is zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    norms = np.linalg.norm(a) * np.linalg.norm(b)
    if norms == 0:
        return math.nan
    return float(a @ b / norms)


def mean_squared_error(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def support_metrics(rates_hat, rates_true, threshold: float) -> tuple:
    """(precision, recall) of detections above ``threshold``; nan when undefined."""
    detected = np.asarray(rates_hat) > threshold
    actual = np.asarray(rates_true) > 0
    hits = int(np.sum(detected & actual))
    precision = hits / int(detected.sum()) if detected.any() else math.nan
    recall = hits / int(actual.sum()) if actual.any() else math.nan
    return precision, recall


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary key parts (platform independent)."""
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    """A sweep: each generation field is a scalar or a list of values to scan."""

    n_dims: Union[int, list] = 20
    sparsity: Union[int, list] = 3
    rate_total: Union[float, list] = 2.0
    n_sensors: Union[int, list] = 10
    n_groups: Union[int, list] = 1
    n_observations: Union[int, list] = 100
    noise_variance: Union[float, list] = 1e-6
    algorithms: Sequence[str] = ("spore",)
    n_trials: int = 10
    base_seed: int = 0
    output_path: Optional[str] = None
    overrides: dict = field(default_factory=dict)  # e.g. {"spore": {"max_iters": 5000}}

    def __post_init__(self):
        if self.n_trials < 0:
            raise ValueError("n_trials must be >= 0")
        if not self.algorithms:
            raise ValueError("need at least one algorithm id")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kwargs = {}
        for key in GRID_COLUMNS:
            if key in mapping:
                kwargs[key] = configio.as_number_or_list(mapping, key)
        if "algorithms" in mapping:
            kwargs["algorithms"] = configio.as_str_list(mapping, "algorithms")
        kwargs["n_trials"] = configio.as_int(mapping, "n_trials", 10)
        kwargs["base_seed"] = configio.as_int(mapping, "base_seed", 0)
        if "output_path" in mapping:
            kwargs["output_path"] = configio.as_str(mapping, "output_path")
        overrides: dict = {}
        for key, value in mapping.items():
            if "." in key:
                scope, param = key.split(".", 1)
                overrides.setdefault(scope, {})[param] = value
        kwargs["overrides"] = overrides
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        out = {key: getattr(self, key) for key in GRID_COLUMNS}
        out["algorithms"] = list(self.algorithms)
        out["n_trials"] = self.n_trials
        out["base_seed"] = self.base_seed
        if self.output_path:
            out["output_path"] = self.output_path
        for scope, params in self.overrides.items():
            for param, value in params.items():
                out[f"{scope}.{param}"] = value
        return out

    def grid_points(self) -> list:
        """Scalar generation settings in sweep order (product of listed axes)."""
        axes = []
        for key in GRID_COLUMNS:
            value = getattr(self, key)
            axes.append([(key, v) for v in (value if isinstance(value, list) else [value])])
        return [dict(combo) for combo in itertools.product(*axes)]

    def spore_config(self, seed: Optional[int] = None) -> SporeConfig:
        mapping = dict(self.overrides.get("spore", {}))
        config = SporeConfig.from_mapping(mapping) if mapping else SporeConfig()
        return replace(config, seed=seed)


@dataclass
class TrialRecord:
    """One algorithm's result on one generated instance."""

    grid: dict
    trial: int
    seed: int
    algorithm: str
    cosine: float
    mse: float
    support_precision: float
    support_recall: float
    wall_time_s: float
    n_iters: Optional[int]
    termination: str
    rates_hat: np.ndarray
    rates_true: np.ndarray

    def sort_key(self, grid_order: dict) -> tuple:
        return (grid_order[_grid_key(self.grid)], self.trial, self.algorithm)


def _grid_key(grid: dict) -> tuple:
    return tuple(grid[k] for k in GRID_COLUMNS)


def _format_vector(values: np.ndarray) -> str:
    return ";".join(repr(float(v)) for v in values)


def _parse_vector(text: str) -> np.ndarray:
    if not text:
        return np.zeros(0)
    return np.array([float(part) for part in text.split(";")])


def evaluate_instance(instance: GeneratedInstance, algorithm: str,
                      spore_config: SporeConfig, rng: np.random.Generator,
                      oracle: Optional[OracleKnowledge] = None) -> RecoveryResult:
    if oracle is None:
        oracle = OracleKnowledge.from_instance(instance)
    return recover(algorithm, instance.batch, instance.ensemble, oracle,
                   spore_config=spore_config, rng=rng)


def _run_cell(config: ExperimentConfig, grid: dict, trial: int) -> list:
    seed = derive_seed(config.base_seed, _grid_key(grid), trial)
    generation = GenerationConfig(seed=seed, **grid)
    instance = generate_instance(generation)
    oracle = OracleKnowledge.from_instance(instance)
    records = []
    for algorithm in config.algorithms:
        algo_seed = derive_seed(config.base_seed, _grid_key(grid), trial, algorithm)
        rng = np.random.default_rng(algo_seed)
        spore_config = config.spore_config(seed=None)
        start = time.perf_counter()
        result = evaluate_instance(instance, algorithm, spore_config, rng, oracle)
        elapsed = time.perf_counter() - start
        threshold = SUPPORT_THRESHOLD_FACTOR * spore_config.rate_floor
        precision, recall = support_metrics(result.rates_hat, instance.rates.values, threshold)
        records.append(TrialRecord(
            grid=grid,
            trial=trial,
            seed=seed,
            algorithm=algorithm,
            cosine=cosine_similarity(result.rates_hat, instance.rates.values),
            mse=mean_squared_error(result.rates_hat, instance.rates.values),
            support_precision=precision,
            support_recall=recall,
            wall_time_s=elapsed,
            n_iters=result.details.get("n_iters"),
            termination=str(result.details.get("termination", "")),
            rates_hat=np.asarray(result.rates_hat, dtype=float),
            rates_true=instance.rates.values,
        ))
    return records


def run_experiment(config: ExperimentConfig, output_path=None, n_threads: int = 1,
                   progress=None) -> list:
    """Run the full sweep and persist a sorted CSV; returns the records.

    Results are deterministic regardless of thread count: instances are seeded
    from (base seed, grid point, trial) and records are sorted before writing.
    """
    unknown = [a for a in config.algorithms if a not in ALGORITHM_IDS]
    if unknown:
        raise ValueError(f"unknown algorithm ids: {', '.join(unknown)}")
    grid_points = config.grid_points()
    grid_order = {_grid_key(g): i for i, g in enumerate(grid_points)}
    cells = [(grid, trial) for grid in grid_points for trial in range(config.n_trials)]
    records: list[TrialRecord] = []
    if n_threads <= 1:
        for grid, trial in cells:
            records.extend(_run_cell(config, grid, trial))
            if progress:
                progress(grid, trial)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [pool.submit(_run_cell, config, grid, trial) for grid, trial in cells]
            for (grid, trial), future in zip(cells, futures):
                records.extend(future.result())
                if progress:
                    progress(grid, trial)
    records.sort(key=lambda r: r.sort_key(grid_order))
    destination = output_path or config.output_path
    if destination:
        write_records(records, destination)
    return records


def write_records(records, path) -> None:
    """Write the fixed-schema CSV atomically (temp file, then replace)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = [repr(r.grid[k]) if isinstance(r.grid[k], float) else r.grid[k]
                   for k in GRID_COLUMNS]
            row += [r.trial, r.seed, r.algorithm, repr(r.cosine), repr(r.mse),
                    repr(r.support_precision), repr(r.support_recall),
                    repr(r.wall_time_s),
                    "" if r.n_iters is None else r.n_iters,
                    r.termination,
                    _format_vector(r.rates_hat), _format_vector(r.rates_true)]
            writer.writerow(row)
    tmp.replace(path)


def read_records(path) -> list:
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV schema in {path}: {reader.fieldnames}")
        records = []
        for row in reader:
            grid = {
                "n_dims": int(row["n_dims"]),
                "sparsity": int(row["sparsity"]),
                "rate_total": float(row["rate_total"]),
                "n_sensors": int(row["n_sensors"]),
                "n_groups": int(row["n_groups"]),
                "n_observations": int(row["n_observations"]),
                "noise_variance": float(row["noise_variance"]),
            }
            records.append(TrialRecord(
                grid=grid,
                trial=int(row["trial"]),
                seed=int(row["seed"]),
                algorithm=row["algorithm"],
                cosine=float(row["cosine"]),
                mse=float(row["mse"]),
                support_precision=float(row["support_precision"]),
                support_recall=float(row["support_recall"]),
                wall_time_s=float(row["wall_time_s"]),
                n_iters=int(row["n_iters"]) if row["n_iters"] else None,
                termination=row["termination"],
                rates_hat=_parse_vector(row["rates_hat"]),
                rates_true=_parse_vector(row["rates_true"]),
            ))
    return records


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryRow:
    grid: dict
    algorithm: str
    n: int
    mean_cosine: float
    half_std_cosine: float
    mean_mse: float


SUMMARY_COLUMNS = GRID_COLUMNS + ("algorithm", "n", "mean_cosine", "half_std_cosine", "mean_mse")


def summarize(records) -> list:
    """Per (grid point, algorithm) means with half-standard-deviation spread."""
    groups: dict = {}
    for r in records:
        groups.setdefault((_grid_key(r.grid), r.algorithm), []).append(r)
    rows = []
    for (grid_key, algorithm), bucket in sorted(groups.items(), key=lambda kv: kv[0]):
        cosines = np.array([b.cosine for b in bucket], dtype=float)
        mses = np.array([b.mse for b in bucket], dtype=float)
        half_std = float(cosines.std(ddof=1) / 2.0) if cosines.size > 1 else 0.0
        rows.append(SummaryRow(
            grid=dict(zip(GRID_COLUMNS, grid_key)),
            algorithm=algorithm,
            n=len(bucket),
            mean_cosine=float(cosines.mean()),
            half_std_cosine=half_std,
            mean_mse=float(mses.mean()),
        ))
    return rows


def write_summary(rows, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([row.grid[k] for k in GRID_COLUMNS]
                            + [row.algorithm, row.n, repr(row.mean_cosine),
                               repr(row.half_std_cosine), repr(row.mean_mse)])


def format_summary_table(rows) -> str:
    header = ["axis values (" + ",".join(GRID_COLUMNS) + ")", "algorithm", "n",
              "mean cosine", "half std"]
    lines = ["  ".join(header)]
    for row in rows:
        grid_text = ",".join(str(row.grid[k]) for k in GRID_COLUMNS)
        lines.append(f"{grid_text}  {row.algorithm}  {row.n}  "
                     f"{row.mean_cosine:.4f}  {row.half_std_cosine:.4f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# efficiency study


@dataclass(frozen=True)
class EfficiencyRow:
    sparsity: int
    n_observations: int
    n_pooled: int
    pooled_variance: float
    cr_bound: float

    @property
    def variance_ratio(self) -> float:
        return self.pooled_variance / self.cr_bound


EFFICIENCY_COLUMNS = ("sparsity", "n_observations", "n_pooled", "pooled_variance",
                      "cr_bound", "variance_ratio")


def efficiency_study(sparsities, observation_counts, n_trials: int,
                     n_dims: int = 50, n_sensors: int = 2, n_groups: int = 20,
                     noise_variance: float = 1e-2, base_seed: int = 0,
                     spore_config: Optional[SporeConfig] = None,
                     n_threads: int = 1, progress=None) -> list:
    """Pooled estimator variance against the direct-observation reference.

    Support rates are pinned to exactly 1, so pooling the support estimates
    across trials is meaningful and the reference variance is 1/D.
    """
    if spore_config is None:
        spore_config = SporeConfig()

    def one_trial(sparsity, n_obs, trial):
        seed = derive_seed(base_seed, "efficiency", sparsity, n_obs, trial)
        rng = np.random.default_rng(seed)
        support = rng.choice(n_dims, size=sparsity, replace=False)
        values = np.zeros(n_dims)
        values[support] = 1.0
        generation = GenerationConfig(
            n_dims=n_dims, sparsity=sparsity, rate_total=float(sparsity),
            n_sensors=n_sensors, n_groups=n_groups, n_observations=n_obs,
            noise_variance=noise_variance)
        instance = generate_instance(generation, rng=rng, rates=PoissonRates(values))
        result = evaluate_instance(instance, "spore", spore_config,
                                   np.random.default_rng(derive_seed(seed, "spore")))
        return result.rates_hat[support]

    rows = []
    for sparsity in sparsities:
        for n_obs in observation_counts:
            tasks = [(sparsity, n_obs, t) for t in range(n_trials)]
            if n_threads <= 1:
                chunks = [one_trial(*t) for t in tasks]
            else:
                with ThreadPoolExecutor(max_workers=n_threads) as pool:
                    chunks = list(pool.map(lambda t: one_trial(*t), tasks))
            pooled = np.concatenate(chunks)
            rows.append(EfficiencyRow(
                sparsity=int(sparsity),
                n_observations=int(n_obs),
                n_pooled=int(pooled.size),
                pooled_variance=float(pooled.var(ddof=1)),
                cr_bound=1.0 / float(n_obs),
            ))
            if progress:
                progress(sparsity, n_obs)
    return rows


def write_efficiency(rows, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(EFFICIENCY_COLUMNS)
        for row in rows:
            writer.writerow([row.sparsity, row.n_observations, row.n_pooled,
                             repr(row.pooled_variance), repr(row.cr_bound),
                             repr(row.variance_ratio)])


# ---------------------------------------------------------------------------
# instance files


def write_instance(instance: GeneratedInstance, path) -> None:
    """Plain-text container with a version line; exact float round-trip."""
    lines = [INSTANCE_MAGIC]
    cfg = instance.config
    lines.append(f"n_dims {cfg.n_dims}")
    lines.append(f"sparsity {cfg.sparsity}")
    lines.append(f"rate_total {cfg.rate_total!r}")
    lines.append(f"n_sensors {cfg.n_sensors}")
    lines.append(f"n_groups {cfg.n_groups}")
    lines.append(f"n_observations {cfg.n_observations}")
    lines.append(f"noise_variance {cfg.noise_variance!r}")
    if cfg.seed is not None:
        lines.append(f"seed {cfg.seed}")
    lines.append("rates " + " ".join(repr(float(v)) for v in instance.rates.values))
    for g, matrix in enumerate(instance.ensemble.matrices, start=1):
        lines.append(f"matrix {g}")
        for row in matrix:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("group_of " + " ".join(str(int(v)) for v in instance.batch.group_of))
    lines.append("signals")
    for row in instance.signals.counts:
        lines.append(" ".join(str(int(v)) for v in row))
    lines.append("measurements")
    for row in instance.batch.measurements:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_instance(path) -> GeneratedInstance:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != INSTANCE_MAGIC:
        raise ValueError(f"not an instance file (expected first line {INSTANCE_MAGIC!r})")
    scalars: dict = {}
    index = 1
    while index < len(lines):
        parts = lines[index].split()
        if parts and parts[0] in ("n_dims", "sparsity", "n_sensors", "n_groups",
                                  "n_observations", "seed"):
            scalars[parts[0]] = int(parts[1])
        elif parts and parts[0] in ("rate_total", "noise_variance"):
            scalars[parts[0]] = float(parts[1])
        else:
            break
        index += 1
    n_dims = scalars["n_dims"]
    n_sensors = scalars["n_sensors"]
    n_groups = scalars["n_groups"]
    n_obs = scalars["n_observations"]

    def expect(prefix):
        nonlocal index
        parts = lines[index].split()
        if not parts or parts[0] != prefix:
            raise ValueError(f"expected {prefix!r} at line {index + 1}")
        index += 1
        return parts[1:]

    rates = np.array([float(v) for v in expect("rates")])
    matrices = []
    for g in range(1, n_groups + 1):
        expect("matrix")
        rows = [np.array([float(v) for v in lines[index + i].split()]) for i in range(n_sensors)]
        index += n_sensors
        matrices.append(np.vstack(rows))
    group_of = np.array([int(v) for v in expect("group_of")])
    expect("signals")
    signals = np.vstack([[int(v) for v in lines[index + i].split()] for i in range(n_dims)])
    index += n_dims
    expect("measurements")
    measurements = np.vstack([[float(v) for v in lines[index + i].split()]
                              for i in range(n_sensors)])
    index += n_sensors

    config = GenerationConfig(
        n_dims=n_dims, sparsity=scalars["sparsity"], rate_total=scalars["rate_total"],
        n_sensors=n_sensors, n_groups=n_groups, n_observations=n_obs,
        noise_variance=scalars["noise_variance"], seed=scalars.get("seed"))
    ensemble = SensingEnsemble(tuple(matrices), group_of)
    return GeneratedInstance(
        rates=PoissonRates(rates),
        ensemble=ensemble,
        signals=SignalMatrix(signals),
        batch=MeasurementBatch(measurements, group_of, scalars["noise_variance"]),
        config=config,
    )


# ---------------------------------------------------------------------------
# density-curve export (single-sensor figure pipeline)


def export_mixture_curves(path, instance: GeneratedInstance, estimates: dict,
                          n_points: int = 1200, pad: float = 0.75,
                          x_max=None) -> np.ndarray:
    """CSV of exact mixture curves (series,y,density) for the truth and estimates.

    Single-sensor instances only; the grid spans the observed measurements
    plus padding and is returned for reuse.
    """
    if instance.batch.n_sensors != 1:
        raise ValueError("density curves are defined for single-sensor instances")
    y = instance.batch.measurements[0]
    grid = np.linspace(float(y.min()) - pad, float(y.max()) + pad, n_points)
    phi = instance.ensemble.matrices[0]
    sigma2 = instance.batch.noise_variance
    series = {"truth": instance.rates.values, **estimates}
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "y", "density"])
        for name, rates in series.items():
            cap = x_max if x_max is not None else LatticeBound.for_rates(rates, 1e-8)
            densities = mixture_density_curve(grid, np.asarray(rates, dtype=float),
                                              phi, sigma2, cap)
            for y_value, density in zip(grid, densities):
                writer.writerow([name, repr(float(y_value)), repr(float(density))])
    return grid


def export_measurements(path, batch: MeasurementBatch) -> None:
    """CSV with one measurement value per row (single-sensor instances)."""
    if batch.n_sensors != 1:
        raise ValueError("measurement export is defined for single-sensor batches")
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["y"])
        for value in batch.measurements[0]:
            writer.writerow([repr(float(value))])
