"""Densities and likelihoods for grouped Gaussian measurements of Poisson counts.

Everything is computed in log space: the experiments run noise variances down
to 1e-6, where linear-space mixture terms underflow. A measurement column is
"numerically dead" for a given sample set when even its largest log-density
falls below the log of the smallest positive normal double; those columns are
skipped and counted rather than poisoning a mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import special, stats

from .model import MeasurementBatch, PoissonRates, SensingEnsemble

__all__ = [
    "LOG_TINY",
    "LatticeBound",
    "log_density_y_given_x",
    "log_gaussian_columns",
    "poisson_log_pmf",
    "poisson_log_pmf_columns",
    "poisson_tail_mass",
    "enumerate_lattice",
    "McLogLikelihood",
    "mc_log_likelihood",
    "ExactLogLikelihood",
    "exact_log_likelihood_small",
    "mixture_density_curve",
]

# Log of the smallest positive normal double; densities below this are treated
# as numerically zero when deciding whether a column carries any information.
LOG_TINY = float(np.log(np.finfo(float).tiny))

_LATTICE_GUARD = 10_000_000


@dataclass(frozen=True)
class LatticeBound:
    """Element-wise cap bounding the finite enumeration box {0..x_max}^N."""

    x_max: int

    def __post_init__(self):
        if self.x_max < 0:
            raise ValueError("x_max must be >= 0")

    @classmethod
    def for_rates(cls, rates, tail_mass: float = 1e-9, min_bound: int = 3) -> "LatticeBound":
        """Smallest cap whose per-coordinate Poisson tail is below ``tail_mass``."""
        lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
        if lam.size == 0 or lam.max() <= 0:
            return cls(min_bound)
        cap = int(stats.poisson.ppf(1.0 - tail_mass, lam.max()))
        return cls(max(cap, min_bound))


def _as_bound(x_max) -> int:
    return x_max.x_max if isinstance(x_max, LatticeBound) else int(x_max)


def log_density_y_given_x(y, x, sensing_matrix, noise_variance: float) -> float:
    """Log of the AWGN measurement density N(y; Phi x, sigma^2 I)."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive; compare exactly when it is 0")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    x = np.asarray(x, dtype=float)
    residual = y - phi @ x
    m = y.shape[0]
    return float(-0.5 * m * math.log(2.0 * math.pi * noise_variance)
                 - residual @ residual / (2.0 * noise_variance))


def log_gaussian_columns(y_columns: np.ndarray, projections: np.ndarray, noise_variance: float) -> np.ndarray:
    """Pairwise log-densities between measurement columns and projected candidates.

    ``y_columns`` is M x B, ``projections`` is M x K; returns B x K.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    m = y_columns.shape[0]
    # squared distances by the Gram expansion; clip negatives from cancellation
    d2 = (np.sum(y_columns**2, axis=0)[:, None]
          - 2.0 * (y_columns.T @ projections)
          + np.sum(projections**2, axis=0)[None, :])
    np.maximum(d2, 0.0, out=d2)
    return -0.5 * m * math.log(2.0 * math.pi * noise_variance) - d2 / (2.0 * noise_variance)


def poisson_log_pmf(counts, rates, rate_floor: float = 0.0) -> float:
    """Joint Poisson log-pmf of an integer vector under element-wise rates.

    Zero-rate coordinates contribute 0 when the count is 0 and -inf otherwise.
    A positive ``rate_floor`` clips the rates from below first.
    """
    x = np.asarray(counts)
    if np.any(x < 0):
        raise ValueError("counts must be nonnegative")
    return float(poisson_log_pmf_columns(x.reshape(-1, 1), rates, rate_floor)[0])


def poisson_log_pmf_columns(count_columns: np.ndarray, rates, rate_floor: float = 0.0) -> np.ndarray:
    """Vectorized :func:`poisson_log_pmf` over the columns of an N x K matrix."""
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    if rate_floor > 0:
        lam = np.maximum(lam, rate_floor)
    x = np.asarray(count_columns, dtype=float)
    if np.any(x < 0):
        raise ValueError("counts must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        rate_term = x * np.log(lam)[:, None]
    rate_term[x == 0] = 0.0  # 0 * log 0 convention
    return rate_term.sum(axis=0) - lam.sum() - special.gammaln(x + 1.0).sum(axis=0)


def poisson_tail_mass(rates, x_max) -> float:
    """P(any coordinate exceeds x_max) for independent Poisson coordinates."""
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    inside = stats.poisson.cdf(_as_bound(x_max), lam)
    return float(1.0 - np.prod(inside))


def enumerate_lattice(n_dims: int, x_max) -> np.ndarray:
    """All points of {0..x_max}^n_dims as an n_dims x K matrix, lexicographic order."""
    cap = _as_bound(x_max)
    size = (cap + 1) ** n_dims
    if size > _LATTICE_GUARD:
        raise ValueError(f"lattice of {size} points exceeds the {_LATTICE_GUARD} guard")
    return np.indices((cap + 1,) * n_dims).reshape(n_dims, -1).astype(np.int64)


class McLogLikelihood(NamedTuple):
    value: float  # nan when every column was skipped
    n_used: int
    n_skipped: int


def _group_log_densities(batch: MeasurementBatch, ensemble: SensingEnsemble,
                         candidates: np.ndarray, columns: Optional[np.ndarray] = None):
    """Yield (column indices, B x K log-density block) per sensor group."""
    if columns is None:
        columns = np.arange(batch.n_observations)
    groups = batch.group_of[columns]
    for g in np.unique(groups):
        cols = columns[groups == g]
        proj = ensemble.matrix_for_group(int(g)) @ candidates
        yield cols, log_gaussian_columns(batch.measurements[:, cols], proj, batch.noise_variance)


def mc_log_likelihood(batch: MeasurementBatch, ensemble: SensingEnsemble, rates,
                      n_samples: int, rng: np.random.Generator) -> McLogLikelihood:
    """Monte Carlo estimate of the mean log-likelihood of the measurements.

    Proposal and prior coincide (samples are drawn from the current rates), so
    each column contributes log of the plain average of its sample densities.
    One shared sample set serves every column. Columns whose samples are all
    numerically zero are skipped and counted.
    """
    from .model import sample_poisson_counts

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    samples = sample_poisson_counts(rates, n_samples, rng).astype(float)
    total = 0.0
    n_used = 0
    for _, logdens in _group_log_densities(batch, ensemble, samples):
        peak = logdens.max(axis=1)
        alive = peak >= LOG_TINY
        if alive.any():
            col_values = special.logsumexp(logdens[alive], axis=1) - math.log(n_samples)
            total += float(col_values.sum())
            n_used += int(alive.sum())
    n_skipped = batch.n_observations - n_used
    if n_used == 0:
        return McLogLikelihood(math.nan, 0, n_skipped)
    return McLogLikelihood(total / n_used, n_used, n_skipped)


class ExactLogLikelihood(NamedTuple):
    value: float
    tail_mass: float  # Poisson mass outside the enumeration box


def exact_log_likelihood_small(batch: MeasurementBatch, ensemble: SensingEnsemble,
                               rates, x_max) -> ExactLogLikelihood:
    """Mean log-likelihood with the latent sum enumerated over a finite box.

    Exact up to truncation at ``x_max``; the neglected Poisson mass is
    reported alongside the value.
    """
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    lattice = enumerate_lattice(lam.shape[0], x_max)
    log_prior = poisson_log_pmf_columns(lattice, lam)
    total = 0.0
    for _, logdens in _group_log_densities(batch, ensemble, lattice.astype(float)):
        total += float(special.logsumexp(logdens + log_prior[None, :], axis=1).sum())
    return ExactLogLikelihood(total / batch.n_observations, poisson_tail_mass(lam, x_max))


def mixture_density_curve(y_grid, rates, sensing_matrix, noise_variance: float, x_max) -> np.ndarray:
    """Marginal measurement density p(y | rates) on a grid, for M = 1 sensors."""
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    if phi.shape[0] != 1:
        raise ValueError("density curves are defined for single-sensor systems only")
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    lattice = enumerate_lattice(lam.shape[0], x_max)
    log_prior = poisson_log_pmf_columns(lattice, lam)
    proj = phi @ lattice.astype(float)
    grid = np.atleast_2d(np.asarray(y_grid, dtype=float))
    logdens = log_gaussian_columns(grid, proj, noise_variance) + log_prior[None, :]
    return np.exp(special.logsumexp(logdens, axis=1))
