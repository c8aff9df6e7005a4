"""Oracle and baseline recovery algorithms.

Covers the brute-force support-search oracle, integer MAP estimation by
branch-and-bound on concave objectives, the alternating MAP scheme with its
initialization variants, convex sum-constrained least-squares oracles, and a
group-mean stacking oracle. Every algorithm is registered under a string id
so the harness and CLI can select them uniformly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from .likelihood import LatticeBound, enumerate_lattice
from .model import GeneratedInstance, MeasurementBatch, PoissonRates, SensingEnsemble
from .optim import (
    box_tangent_bound,
    maximize_concave_on_box,
    project_simplex,
    simplex_least_squares,
    simplex_pg_solve,
)
from .solver import SporeConfig, run_spore

__all__ = [
    "OracleKnowledge",
    "BbNode",
    "map_integer_column",
    "sum_map_integer_column",
    "l0_oracle",
    "AlternatingResult",
    "alternating_map",
    "sum_lambda_oracle",
    "l1_oracle",
    "gm_smv_oracle",
    "RecoveryResult",
    "ALGORITHM_IDS",
    "recover",
]

# keep a little slack so float noise in bounds never prunes a true optimum
_PRUNE_SAFETY = 1e-9
_L0_OPS_GUARD = 5e8


@dataclass(frozen=True)
class OracleKnowledge:
    """Ground-truth quantities granted to baselines; populate what each needs."""

    sparsity: Optional[int] = None
    x_max_true: Optional[int] = None
    total_count: Optional[float] = None
    rate_total: Optional[float] = None

    @classmethod
    def from_instance(cls, instance: GeneratedInstance) -> "OracleKnowledge":
        return cls(
            sparsity=instance.rates.sparsity,
            x_max_true=int(instance.signals.counts.max()),
            total_count=float(instance.signals.counts.sum()),
            rate_total=float(instance.rates.values.sum()),
        )


class _ElementwisePoissonMap:
    """Concave MAP objective with an independent Poisson prior per coordinate."""

    def __init__(self, y, phi, noise_variance, rates):
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.phi = np.atleast_2d(np.asarray(phi, dtype=float))
        self.inv_var = 1.0 / noise_variance
        self.log_rates = np.log(np.asarray(rates, dtype=float))

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        r = self.y - self.phi @ x
        return float(-0.5 * self.inv_var * (r @ r)
                     + x @ self.log_rates - special.gammaln(x + 1.0).sum())

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.inv_var * (self.phi.T @ (self.y - self.phi @ x))
                + self.log_rates - special.digamma(x + 1.0))


class _SumPoissonMap:
    """Concave MAP objective with a Poisson prior on the total count only."""

    def __init__(self, y, phi, noise_variance, rate_total):
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.phi = np.atleast_2d(np.asarray(phi, dtype=float))
        self.inv_var = 1.0 / noise_variance
        self.log_total = math.log(rate_total)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        r = self.y - self.phi @ x
        total = x.sum()
        return float(-0.5 * self.inv_var * (r @ r)
                     + total * self.log_total - special.gammaln(total + 1.0))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.inv_var * (self.phi.T @ (self.y - self.phi @ x))
                + self.log_total - special.digamma(x.sum() + 1.0))


@dataclass
class BbNode:
    """Search box with the best upper bound known for it so far."""

    lower: np.ndarray
    upper: np.ndarray
    bound: float
    warm: np.ndarray

    def is_singleton(self) -> bool:
        return bool(np.all(self.lower == self.upper))


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    return tuple(a.tolist()) < tuple(b.tolist())


def _branch_and_bound_maximize(objective, x_max_vec: np.ndarray):
    """Exact integer maximizer of a concave objective on {0..x_max}^N.

    Depth-first search with best-bound child ordering. Box bounds come from a
    tangent plane at the (approximately) solved continuous relaxation, which
    upper-bounds a concave function regardless of inner solve accuracy. Value
    ties resolve to the lexicographically smallest point.
    """
    n = x_max_vec.shape[0]
    best_x = np.zeros(n, dtype=np.int64)
    best_val = objective.value(best_x)

    def consider(x_int: np.ndarray):
        nonlocal best_x, best_val
        v = objective.value(x_int)
        if v > best_val or (v == best_val and _lex_less(x_int, best_x)):
            best_x, best_val = x_int.copy(), v

    root = BbNode(np.zeros(n), x_max_vec.astype(float), math.inf, x_max_vec / 2.0)
    stack = [root]
    while stack:
        node = stack.pop()
        slack = _PRUNE_SAFETY * (1.0 + abs(best_val))
        if node.bound < best_val - slack:
            continue
        if node.is_singleton():
            consider(node.lower.astype(np.int64))
            continue
        x_rel, f_rel, g_rel = maximize_concave_on_box(
            objective.value, objective.grad, node.lower, node.upper,
            x0=np.clip(node.warm, node.lower, node.upper))
        tight = box_tangent_bound(f_rel, g_rel, x_rel, node.lower, node.upper)
        if tight < best_val - slack:
            continue
        consider(np.rint(np.clip(x_rel, node.lower, node.upper)).astype(np.int64))

        frac = np.abs(x_rel - np.rint(x_rel))
        widths = node.upper - node.lower
        frac[widths == 0] = -1.0  # fixed coordinates cannot branch
        j = int(np.argmax(frac))
        if frac[j] < 1e-9:
            j = int(np.argmax(widths))
            split = math.floor((node.lower[j] + node.upper[j]) / 2.0)
        else:
            split = math.floor(x_rel[j])
        split = int(np.clip(split, node.lower[j], node.upper[j] - 1))

        children = []
        for lo_j, hi_j in ((node.lower[j], split), (split + 1, node.upper[j])):
            lower = node.lower.copy()
            upper = node.upper.copy()
            lower[j], upper[j] = lo_j, hi_j
            bound = box_tangent_bound(f_rel, g_rel, x_rel, lower, upper)
            if bound >= best_val - slack:
                children.append(BbNode(lower, upper, bound, np.clip(x_rel, lower, upper)))
        children.sort(key=lambda c: c.bound)  # better bound popped first
        stack.extend(children)
    return best_x, best_val


def _as_cap_vector(x_max, n_dims: int) -> np.ndarray:
    if isinstance(x_max, LatticeBound):
        x_max = x_max.x_max
    cap = np.asarray(x_max, dtype=np.int64)
    if cap.ndim == 0:
        cap = np.full(n_dims, int(cap), dtype=np.int64)
    if cap.shape != (n_dims,) or np.any(cap < 0):
        raise ValueError("x_max must be a nonnegative scalar or length-N vector")
    return cap


def map_integer_column(y, sensing_matrix, noise_variance: float, rates, x_max) -> np.ndarray:
    """Exact MAP count vector for one column under the element-wise Poisson prior."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("MAP estimation needs strictly positive rates (floor them first)")
    cap = _as_cap_vector(x_max, phi.shape[1])
    objective = _ElementwisePoissonMap(y, phi, noise_variance, lam)
    best_x, _ = _branch_and_bound_maximize(objective, cap)
    return best_x


def sum_map_integer_column(y, sensing_matrix, noise_variance: float, rate_total: float, x_max) -> np.ndarray:
    """Exact MAP count vector under a Poisson prior on the column total."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if rate_total <= 0:
        raise ValueError("rate_total must be positive")
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    cap = _as_cap_vector(x_max, phi.shape[1])
    objective = _SumPoissonMap(y, phi, noise_variance, rate_total)
    best_x, _ = _branch_and_bound_maximize(objective, cap)
    return best_x


def _require_single_group(batch: MeasurementBatch):
    if np.unique(batch.group_of).size > 1:
        raise ValueError("this oracle is defined for a single sensor group")


def l0_oracle(batch: MeasurementBatch, sensing_matrix, sparsity: int, x_max_true: int,
              max_ops: float = _L0_OPS_GUARD) -> np.ndarray:
    """Best support of the stated size by exhaustive measurement-error search.

    For every size-``sparsity`` support, each column picks the bounded integer
    combination minimizing its residual; the support with the smallest total
    error wins, ties going to the earliest support in lexicographic order.
    Knows nothing about the Poisson structure.
    """
    _require_single_group(batch)
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    n_dims = phi.shape[1]
    if not 1 <= sparsity <= n_dims:
        raise ValueError("sparsity must lie in 1..n_dims")
    if x_max_true < 0:
        raise ValueError("x_max_true must be >= 0")
    n_candidates = (x_max_true + 1) ** sparsity
    n_supports = math.comb(n_dims, sparsity)
    if n_candidates * n_supports * batch.n_observations * phi.shape[0] > max_ops:
        raise ValueError("support search exceeds the compute guard")

    candidates = enumerate_lattice(sparsity, x_max_true).astype(float)  # lexicographic order
    y = batch.measurements
    y_sq = np.sum(y**2, axis=0)
    best_support = None
    best_error = math.inf
    for support in itertools.combinations(range(n_dims), sparsity):
        proj = phi[:, support] @ candidates
        d2 = y_sq[:, None] - 2.0 * (y.T @ proj) + np.sum(proj**2, axis=0)[None, :]
        total = float(np.min(d2, axis=1).sum())
        if total < best_error:
            best_error = total
            best_support = support

    proj = phi[:, best_support] @ candidates
    d2 = y_sq[:, None] - 2.0 * (y.T @ proj) + np.sum(proj**2, axis=0)[None, :]
    picks = np.argmin(d2, axis=1)  # first minimum: lexicographically smallest combination
    rates_hat = np.zeros(n_dims)
    rates_hat[list(best_support)] = candidates[:, picks].mean(axis=1)
    return rates_hat


class AlternatingResult(NamedTuple):
    rates_hat: np.ndarray
    n_rounds: int
    reached_fixed_point: bool


def alternating_map(batch: MeasurementBatch, ensemble: SensingEnsemble, noise_variance: float,
                    init_rates, max_rounds: int = 50, x_max=None,
                    rate_floor: float = 1e-3) -> AlternatingResult:
    """Alternate exact per-column MAP counts with the closed-form rate update.

    The rate update is the column mean of the count estimates, floored so the
    next MAP round keeps every coordinate retrievable. Stops when the count
    matrix repeats (the rate step is deterministic, so that is a fixed point)
    or after ``max_rounds``.
    """
    lam = np.asarray(init_rates, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("initial rates must be strictly positive")
    previous = None
    counts = np.zeros((ensemble.n_dims, batch.n_observations), dtype=np.int64)
    rounds = 0
    fixed_point = False
    for rounds in range(1, max_rounds + 1):
        cap = _as_cap_vector(x_max, ensemble.n_dims) if x_max is not None else \
            _as_cap_vector(LatticeBound.for_rates(lam), ensemble.n_dims)
        for d in range(batch.n_observations):
            phi = ensemble.matrix_for_group(int(batch.group_of[d]))
            counts[:, d] = map_integer_column(batch.measurements[:, d], phi,
                                              noise_variance, lam, cap)
        if previous is not None and np.array_equal(counts, previous):
            fixed_point = True
            break
        previous = counts.copy()
        lam = np.maximum(counts.mean(axis=1), rate_floor)
    return AlternatingResult(lam, rounds, fixed_point)


def sum_lambda_oracle(batch: MeasurementBatch, ensemble: SensingEnsemble, noise_variance: float,
                      rate_total: float, x_max=None) -> np.ndarray:
    """Per-column MAP with only the true rate total as prior; rates are count means."""
    if rate_total <= 0:
        raise ValueError("rate_total must be positive")
    cap = _as_cap_vector(x_max, ensemble.n_dims) if x_max is not None else \
        _as_cap_vector(LatticeBound.for_rates(np.array([rate_total])), ensemble.n_dims)
    counts = np.zeros((ensemble.n_dims, batch.n_observations))
    for d in range(batch.n_observations):
        phi = ensemble.matrix_for_group(int(batch.group_of[d]))
        counts[:, d] = sum_map_integer_column(batch.measurements[:, d], phi,
                                              noise_variance, rate_total, cap)
    return counts.mean(axis=1)


def l1_oracle(batch: MeasurementBatch, ensemble: SensingEnsemble, total_count: float,
              mode: str = "smv", tol: float = 1e-10) -> np.ndarray:
    """Sum-constrained nonnegative least squares armed with the true total count.

    ``smv`` collapses the measurements to a single summed column (one group
    only); ``mmv`` solves the continuous relaxation over the full count matrix
    with one global sum constraint. Rates are the recovered counts averaged
    over columns.
    """
    if total_count < 0:
        raise ValueError("total_count must be >= 0")
    n_dims = ensemble.n_dims
    n_obs = batch.n_observations
    if total_count == 0:
        return np.zeros(n_dims)
    if mode == "smv":
        _require_single_group(batch)
        summed = batch.measurements.sum(axis=1)
        x = simplex_least_squares(ensemble.matrices[0], summed, total_count, tol=tol)
        return x / n_obs
    if mode == "mmv":
        group_cols = {g: batch.columns_in_group(g) for g in range(1, ensemble.n_groups + 1)}
        grams = {g: ensemble.matrices[g - 1].T @ ensemble.matrices[g - 1] for g in group_cols}
        rhs = {g: ensemble.matrices[g - 1].T @ batch.measurements[:, cols]
               for g, cols in group_cols.items()}
        lipschitz = max(float(np.linalg.eigvalsh(gram)[-1]) for gram in grams.values())

        def gradient(flat: np.ndarray) -> np.ndarray:
            x = flat.reshape(n_dims, n_obs)
            out = np.empty_like(x)
            for g, cols in group_cols.items():
                if cols.size:
                    out[:, cols] = grams[g] @ x[:, cols] - rhs[g]
            return out.reshape(-1)

        flat = simplex_pg_solve(gradient, n_dims * n_obs, total_count,
                                lipschitz=lipschitz, tol=tol)
        return flat.reshape(n_dims, n_obs).mean(axis=1)
    raise ValueError(f"unknown mode {mode!r}, expected 'smv' or 'mmv'")


def gm_smv_oracle(batch: MeasurementBatch, ensemble: SensingEnsemble, total_count: float,
                  tol: float = 1e-10) -> np.ndarray:
    """Stack per-group measurement means and solve one sum-constrained least squares.

    Treats each group mean as an (approximate) noisy projection of the rates,
    giving a G*M-row system solved directly for the rate vector.
    """
    if total_count < 0:
        raise ValueError("total_count must be >= 0")
    means = []
    for g in range(1, ensemble.n_groups + 1):
        cols = batch.columns_in_group(g)
        if cols.size == 0:
            raise ValueError(f"group {g} has no observations")
        means.append(batch.measurements[:, cols].mean(axis=1))
    stacked_y = np.concatenate(means)
    stacked_phi = np.vstack(ensemble.matrices)
    return simplex_least_squares(stacked_phi, stacked_y, total_count / batch.n_observations, tol=tol)


@dataclass
class RecoveryResult:
    algorithm: str
    rates_hat: np.ndarray
    details: dict = field(default_factory=dict)


ALGORITHM_IDS = (
    "spore",
    "l0_oracle",
    "alt_random",
    "alt_unbiased",
    "alt_sumlam",
    "alt_spore",
    "sumlam_oracle",
    "l1_smv",
    "l1_mmv",
    "gm_smv",
)


def _need(oracle: Optional[OracleKnowledge], attribute: str, algorithm: str):
    value = getattr(oracle, attribute, None) if oracle is not None else None
    if value is None:
        raise ValueError(f"algorithm {algorithm!r} needs oracle knowledge {attribute!r}")
    return value


def recover(algorithm: str, batch: MeasurementBatch, ensemble: SensingEnsemble,
            oracle: Optional[OracleKnowledge] = None,
            spore_config: Optional[SporeConfig] = None,
            rng: Optional[np.random.Generator] = None) -> RecoveryResult:
    """Run one registered algorithm on a measurement batch."""
    if algorithm not in ALGORITHM_IDS:
        raise ValueError(f"unknown algorithm {algorithm!r}; known ids: {', '.join(ALGORITHM_IDS)}")
    if rng is None:
        rng = np.random.default_rng()
    noise_variance = batch.noise_variance
    rate_floor = (spore_config or SporeConfig()).rate_floor

    if algorithm == "spore":
        result = run_spore(batch, ensemble, spore_config, rng)
        return RecoveryResult(algorithm, result.rates_hat.values, {
            "n_iters": result.n_iters,
            "termination": result.termination_reason,
        })
    if algorithm == "l0_oracle":
        rates = l0_oracle(batch, ensemble.matrices[0],
                          _need(oracle, "sparsity", algorithm),
                          _need(oracle, "x_max_true", algorithm))
        return RecoveryResult(algorithm, rates)
    if algorithm == "sumlam_oracle":
        rates = sum_lambda_oracle(batch, ensemble, noise_variance,
                                  _need(oracle, "rate_total", algorithm),
                                  getattr(oracle, "x_max_true", None))
        return RecoveryResult(algorithm, rates)
    if algorithm == "l1_smv":
        return RecoveryResult(algorithm, l1_oracle(batch, ensemble,
                                                   _need(oracle, "total_count", algorithm), "smv"))
    if algorithm == "l1_mmv":
        return RecoveryResult(algorithm, l1_oracle(batch, ensemble,
                                                   _need(oracle, "total_count", algorithm), "mmv"))
    if algorithm == "gm_smv":
        return RecoveryResult(algorithm, gm_smv_oracle(batch, ensemble,
                                                       _need(oracle, "total_count", algorithm)))

    # alternating variants differ only in their initialization
    x_max = getattr(oracle, "x_max_true", None) if oracle is not None else None
    details: dict = {}
    if algorithm == "alt_random":
        init = rng.random(ensemble.n_dims) + 0.1
    elif algorithm == "alt_unbiased":
        init = np.full(ensemble.n_dims, _need(oracle, "rate_total", algorithm) / ensemble.n_dims)
    elif algorithm == "alt_sumlam":
        start = sum_lambda_oracle(batch, ensemble, noise_variance,
                                  _need(oracle, "rate_total", algorithm), x_max)
        init = np.maximum(start, rate_floor)
    else:  # alt_spore
        spore_result = run_spore(batch, ensemble, spore_config, rng)
        init = spore_result.rates_hat.values
        details["spore_termination"] = spore_result.termination_reason
    alt = alternating_map(batch, ensemble, noise_variance, init, x_max=x_max,
                          rate_floor=rate_floor)
    details.update({"n_rounds": alt.n_rounds, "reached_fixed_point": alt.reached_fixed_point})
    return RecoveryResult(algorithm, alt.rates_hat, details)
