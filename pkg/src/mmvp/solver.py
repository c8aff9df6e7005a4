"""Sparse Poisson rate recovery by batch stochastic gradient ascent.

Each iteration draws a batch of measurement columns and a fresh set of count
samples from the current rate estimate, forms the self-normalized Monte Carlo
gradient of the mean log-likelihood, rescales oversized steps, and clips the
rates at a positive floor so every coordinate keeps a chance of being sampled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .likelihood import (
    LOG_TINY,
    enumerate_lattice,
    log_gaussian_columns,
    poisson_log_pmf_columns,
)
from .model import MeasurementBatch, PoissonRates, SensingEnsemble, sample_poisson_counts

__all__ = [
    "SporeConfig",
    "SporeResult",
    "IterationStats",
    "GradientEstimate",
    "spore_gradient",
    "lattice_gradient",
    "rescale_step",
    "clip_update",
    "run_spore",
    "write_trace_csv",
]

TRACE_COLUMNS = ("iter", "objective_estimate", "step_norm", "n_skipped", "alpha")


@dataclass
class SporeConfig:
    """Solver hyperparameters; defaults match the simulation scales this targets."""

    n_samples: int = 1000
    batch_size: int = 100
    learning_rate: float = 0.1
    step_cap: float = 1.0
    rate_floor: float = 1e-3
    init_value: float = 0.1
    max_iters: int = 20000
    ma_window: int = 50
    ma_tol: float = 1e-3
    patience: int = 200
    alpha_decay: float = 0.5
    n_decays_to_stop: int = 3
    seed: Optional[int] = None
    # exact-gradient mode: replace sampling with the full lattice {0..cap}^N
    # and run deterministic full-batch ascent (batch_size is ignored)
    lattice_cap: Optional[int] = None

    def __post_init__(self):
        if self.n_samples < 1 or self.batch_size < 1:
            raise ValueError("n_samples and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.step_cap <= 0:
            raise ValueError("learning_rate and step_cap must be positive")
        if not 0 < self.rate_floor < self.init_value:
            raise ValueError("need 0 < rate_floor < init_value")
        if not 0 < self.alpha_decay < 1:
            raise ValueError("alpha_decay must lie in (0, 1)")
        if self.max_iters < 1 or self.ma_window < 1 or self.patience < 1:
            raise ValueError("max_iters, ma_window and patience must be >= 1")
        if self.n_decays_to_stop < 1:
            raise ValueError("n_decays_to_stop must be >= 1")

    def to_mapping(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = value
        return out

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SporeConfig":
        from . import configio

        kwargs = {}
        for f in fields(cls):
            if f.name not in mapping:
                continue
            if f.name in ("seed", "lattice_cap"):
                kwargs[f.name] = configio.as_optional_int(mapping, f.name)
            elif f.type == "int":
                kwargs[f.name] = configio.as_int(mapping, f.name)
            else:
                kwargs[f.name] = configio.as_float(mapping, f.name)
        return cls(**kwargs)


class IterationStats(NamedTuple):
    iteration: int
    objective: float  # nan when every batch column was numerically dead
    step_norm: float
    n_skipped: int
    alpha: float


class GradientEstimate(NamedTuple):
    gradient: np.ndarray
    objective: float
    n_used: int
    n_skipped: int


@dataclass
class SporeResult:
    rates_hat: PoissonRates
    trace: list
    n_iters: int
    termination_reason: str

    def objective_trace(self) -> np.ndarray:
        return np.array([row.objective for row in self.trace])


def write_trace_csv(trace, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow([row.iteration, repr(row.objective), repr(row.step_norm),
                             row.n_skipped, repr(row.alpha)])


def _weighted_estimate(batch: MeasurementBatch, ensemble: SensingEnsemble, lam: np.ndarray,
                       candidates: np.ndarray, columns: np.ndarray,
                       log_offsets: Optional[np.ndarray], log_norm: float) -> GradientEstimate:
    """Gradient and objective from weighted candidate signals.

    Candidate weights for column d are p(y_d | x) * exp(offset_x); the
    per-column gradient is the weighted mean of x / lam - 1 and the objective
    contribution is logsumexp of the weighted densities minus ``log_norm``.
    Columns whose largest log-weight is numerically zero are dropped, and the
    averaging divisor shrinks accordingly.
    """
    ratio_sum = np.zeros(lam.shape[0])
    objective_sum = 0.0
    n_used = 0
    groups = batch.group_of[columns]
    cand_float = candidates.astype(float)

    def accumulate(logw, cols_weight=None):
        nonlocal ratio_sum, objective_sum, n_used
        if log_offsets is not None:
            logw = logw + log_offsets[None, :]
        peak = logw.max(axis=1)
        alive = peak >= LOG_TINY
        if not alive.any():
            return
        w = np.exp(logw[alive] - peak[alive, None])
        denom = w.sum(axis=1)
        numer = w @ cand_float.T
        ratio_sum += (numer / denom[:, None]).sum(axis=0)
        objective_sum += float((peak[alive] + np.log(denom)).sum()) - log_norm * alive.sum()
        n_used += int(alive.sum())

    if batch.n_sensors == 1:
        # single-sensor fast path: one stacked projection serves every group
        present = np.unique(groups)
        stacked = np.vstack([ensemble.matrix_for_group(int(g)) for g in present])
        projections = stacked @ cand_float  # (n present groups, K)
        per_column = projections[np.searchsorted(present, groups)]
        y = batch.measurements[0, columns][:, None]
        logw = (-0.5 * math.log(2.0 * math.pi * batch.noise_variance)
                - (y - per_column) ** 2 / (2.0 * batch.noise_variance))
        accumulate(logw)
    else:
        for g in np.unique(groups):
            cols = columns[groups == g]
            proj = ensemble.matrix_for_group(int(g)) @ cand_float
            accumulate(log_gaussian_columns(batch.measurements[:, cols], proj,
                                            batch.noise_variance))
    n_skipped = columns.size - n_used
    if n_used == 0:
        return GradientEstimate(np.zeros(lam.shape[0]), math.nan, 0, n_skipped)
    gradient = ratio_sum / (n_used * lam) - 1.0
    return GradientEstimate(gradient, objective_sum / n_used, n_used, n_skipped)


def spore_gradient(batch: MeasurementBatch, ensemble: SensingEnsemble, rates,
                   samples: np.ndarray, columns=None, rate_floor: float = 1e-3) -> GradientEstimate:
    """Monte Carlo gradient of the mean log-likelihood at ``rates``.

    ``samples`` holds count vectors drawn from Poisson(rates), one per column;
    they are shared by every batch column. Repeated samples are collapsed into
    multiplicity weights, which leaves the estimate unchanged.
    """
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    if np.any(lam < rate_floor):
        raise ValueError("rates must sit at or above the floor before a gradient step")
    samples = np.asarray(samples)
    if columns is None:
        columns = np.arange(batch.n_observations)
    else:
        columns = np.asarray(columns, dtype=np.int64)
    unique, counts = np.unique(samples, axis=1, return_counts=True)
    return _weighted_estimate(batch, ensemble, lam, unique, columns,
                              np.log(counts.astype(float)), math.log(samples.shape[1]))


def lattice_gradient(batch: MeasurementBatch, ensemble: SensingEnsemble, rates,
                     x_max, columns=None, rate_floor: float = 0.0) -> GradientEstimate:
    """Exact gradient of the box-truncated mean log-likelihood.

    Replaces the sample set with every lattice point weighted by its Poisson
    probability; the objective field is then the truncated exact value.
    """
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    if rate_floor > 0 and np.any(lam < rate_floor):
        raise ValueError("rates must sit at or above the floor")
    if np.any(lam <= 0):
        raise ValueError("lattice gradient needs strictly positive rates")
    if columns is None:
        columns = np.arange(batch.n_observations)
    else:
        columns = np.asarray(columns, dtype=np.int64)
    lattice = enumerate_lattice(lam.shape[0], x_max)
    log_prior = poisson_log_pmf_columns(lattice, lam)
    return _weighted_estimate(batch, ensemble, lam, lattice, columns, log_prior, 0.0)


def rescale_step(delta: np.ndarray, rates: np.ndarray, rate_floor: float, step_cap: float) -> np.ndarray:
    """Cap the step norm at ``step_cap``, measuring only coordinates that stay above the floor.

    Coordinates about to clip at the floor are excluded from the norm, but any
    rescaling factor applies to the whole vector.
    """
    free = rates + delta > rate_floor
    norm = float(np.linalg.norm(delta[free]))
    if norm > step_cap:
        return delta * (step_cap / norm)
    return delta


def clip_update(rates: np.ndarray, delta: np.ndarray, rate_floor: float) -> np.ndarray:
    """Apply the step and clip every coordinate at the floor."""
    return np.maximum(rates + delta, rate_floor)


def run_spore(batch: MeasurementBatch, ensemble: SensingEnsemble,
              config: Optional[SporeConfig] = None,
              rng: Optional[np.random.Generator] = None) -> SporeResult:
    """Run the full recovery loop and return the rate estimate with its trace.

    Stops when the windowed moving average of the estimate settles, when the
    learning rate has been cut ``n_decays_to_stop`` times without objective
    improvement, or at ``max_iters``. Iterations where every batch column is
    numerically dead take a zero step but still advance the clocks.
    """
    if config is None:
        config = SporeConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if batch.n_observations == 0:
        raise ValueError("measurement batch has no columns")
    if batch.n_sensors != ensemble.n_sensors:
        raise ValueError("batch and ensemble disagree on the number of sensors")

    n_dims = ensemble.n_dims
    lam = np.full(n_dims, config.init_value, dtype=float)
    alpha = config.learning_rate
    best_objective = -math.inf
    iters_since_improvement = 0
    n_decays = 0
    window = config.ma_window
    history = np.empty((config.max_iters, n_dims))
    objective_window: list[float] = []  # raw estimates are too noisy to compare
    trace: list[IterationStats] = []
    termination = "max_iters"

    lattice_mode = config.lattice_cap is not None
    if lattice_mode:
        lattice = enumerate_lattice(n_dims, config.lattice_cap)
        all_columns = np.arange(batch.n_observations)

    for i in range(config.max_iters):
        if lattice_mode:
            log_prior = poisson_log_pmf_columns(lattice, lam)
            estimate = _weighted_estimate(batch, ensemble, lam, lattice, all_columns, log_prior, 0.0)
        else:
            columns = rng.integers(0, batch.n_observations, size=config.batch_size)
            samples = sample_poisson_counts(lam, config.n_samples, rng)
            unique, counts = np.unique(samples, axis=1, return_counts=True)
            estimate = _weighted_estimate(batch, ensemble, lam, unique, columns,
                                          np.log(counts.astype(float)), math.log(config.n_samples))

        if estimate.n_used == 0:
            delta = np.zeros(n_dims)
        else:
            delta = rescale_step(alpha * estimate.gradient, lam, config.rate_floor, config.step_cap)
        lam = clip_update(lam, delta, config.rate_floor)
        assert np.all(lam >= config.rate_floor)

        history[i] = lam
        trace.append(IterationStats(i + 1, estimate.objective, float(np.linalg.norm(delta)),
                                    estimate.n_skipped, alpha))

        if i + 1 >= 2 * window:
            recent = history[i + 1 - window:i + 1].mean(axis=0)
            previous = history[i + 1 - 2 * window:i + 1 - window].mean(axis=0)
            denom = max(float(np.linalg.norm(previous)), np.finfo(float).tiny)
            if float(np.linalg.norm(recent - previous)) / denom < config.ma_tol:
                termination = "converged"
                break

        # patience works on a window-averaged objective: single batch
        # estimates fluctuate enough that their running maximum ratchets on
        # lucky draws and triggers spurious learning-rate cuts
        if math.isfinite(estimate.objective):
            objective_window.append(estimate.objective)
            if len(objective_window) > window:
                objective_window.pop(0)
        smoothed = (sum(objective_window) / len(objective_window)
                    if objective_window else -math.inf)
        if smoothed > best_objective:
            best_objective = smoothed
            iters_since_improvement = 0
        else:
            iters_since_improvement += 1
            if iters_since_improvement >= config.patience:
                alpha *= config.alpha_decay
                n_decays += 1
                iters_since_improvement = 0
                if n_decays >= config.n_decays_to_stop:
                    termination = "alpha_exhausted"
                    break

    return SporeResult(PoissonRates(lam), trace, len(trace), termination)
