"""Executable checks of the model's identifiability and estimation theory.

Covers the nullspace and distinct-columns premises for identifiability,
collision-set enumeration with box-completeness certificates, numerical
Fisher information diagnostics with two independently computed loss routes,
and the small-rate analysis built on Gaussian kernel matrices: closed-form
and numeric maximizers, the group-averaged kernel in closed form, and the
affine-recovery / rank-correlation probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, special, stats

from .likelihood import LatticeBound, enumerate_lattice, poisson_log_pmf_columns, poisson_tail_mass
from .model import PoissonRates
from .optim import project_simplex

__all__ = [
    "IndeterminateCheckError",
    "FisherAccuracyError",
    "nullspace_positive_check",
    "distinct_columns_check",
    "CollisionSet",
    "collision_set",
    "collision_partition",
    "onehot_singleton_exists",
    "FisherReport",
    "fisher_diag_numeric",
    "fisher_diag_mc",
    "JensenKernel",
    "jensen_kernel",
    "closed_form_group_kernel",
    "JensenMaximizerResult",
    "jensen_maximizer",
    "TildeKappa",
    "tilde_kappa",
    "AffineRecoveryReport",
    "affine_recovery_check",
]


class IndeterminateCheckError(RuntimeError):
    """The LP behind a check did not converge; neither true nor false is safe."""


class FisherAccuracyError(RuntimeError):
    """Quadrature coverage or internal cross-checks failed their thresholds."""


# ---------------------------------------------------------------------------
# identifiability premises


def _phase1_feasible(rows, rhs) -> bool:
    """Exact phase-1 simplex feasibility for A v = b, v >= 0 (Fractions, Bland's rule)."""
    m = len(rows)
    n = len(rows[0])
    tableau = [list(row) + [Fraction(int(i == r)) for i in range(m)] + [rhs[r]]
               for r, row in enumerate(rows)]
    basis = list(range(n, n + m))
    costs = [Fraction(0)] * n + [Fraction(1)] * m
    while True:
        entering = -1
        for j in range(n + m):
            reduced = costs[j] - sum(costs[basis[i]] * tableau[i][j] for i in range(m))
            if reduced < 0:
                entering = j
                break
        if entering < 0:
            break
        leaving = -1
        best_ratio = None
        for i in range(m):
            if tableau[i][entering] > 0:
                ratio = tableau[i][-1] / tableau[i][entering]
                if best_ratio is None or ratio < best_ratio or (
                        ratio == best_ratio and basis[i] < basis[leaving]):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise IndeterminateCheckError("phase-1 simplex became unbounded")
        pivot = tableau[leaving][entering]
        tableau[leaving] = [v / pivot for v in tableau[leaving]]
        for i in range(m):
            if i != leaving and tableau[i][entering] != 0:
                factor = tableau[i][entering]
                tableau[i] = [a - factor * b for a, b in zip(tableau[i], tableau[leaving])]
        basis[leaving] = entering
    objective = sum(costs[basis[i]] * tableau[i][-1] for i in range(m))
    return objective == 0


def nullspace_positive_check(matrix) -> bool:
    """True iff the only nonnegative vector in the matrix's nullspace is zero.

    Integer-valued matrices are decided exactly in rational arithmetic; any
    other matrix goes through an LP (maximize the coordinate sum subject to
    a zero projection and a unit box) with tight feasibility tolerances.
    """
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(phi)):
        raise ValueError("matrix must be finite")
    m, n = phi.shape
    if np.all(phi == np.rint(phi)) and np.all(np.abs(phi) < 2**40):
        # witness exists iff {x >= 0, sum x = 1, phi x = 0} is feasible
        rows = [[Fraction(int(phi[i, j])) for j in range(n)] for i in range(m)]
        rows.append([Fraction(1)] * n)
        rhs = [Fraction(0)] * m + [Fraction(1)]
        return not _phase1_feasible(rows, rhs)

    result = optimize.linprog(
        c=-np.ones(n),
        A_eq=phi,
        b_eq=np.zeros(m),
        bounds=[(0.0, 1.0)] * n,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10,
                 "dual_feasibility_tolerance": 1e-10},
    )
    if result.status != 0:
        raise IndeterminateCheckError(f"LP solver status {result.status}: {result.message}")
    return float(-result.fun) <= 1e-9


def distinct_columns_check(matrix, tol: float = 0.0) -> bool:
    """True iff every pair of columns differs by more than ``tol`` somewhere."""
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = phi.shape[1]
    for a in range(n):
        diffs = np.abs(phi[:, a + 1:] - phi[:, a:a + 1])
        if diffs.size and np.any(diffs.max(axis=0) <= tol):
            return False
    return True


# ---------------------------------------------------------------------------
# collision sets


@dataclass(frozen=True)
class CollisionSet:
    """All box-bounded integer signals sharing one projection."""

    anchor: np.ndarray
    members: np.ndarray  # K x N, lexicographic order
    box_complete: bool
    x_max: int

    def __len__(self) -> int:
        return self.members.shape[0]

    def is_singleton(self) -> bool:
        return self.members.shape[0] == 1


def _certified_cap(phi: np.ndarray, anchor: np.ndarray) -> Optional[int]:
    """Provable member bound from any strictly positive row, if one exists."""
    positive_rows = phi[np.all(phi > 0, axis=1)]
    if positive_rows.size == 0:
        return None
    caps = [(row @ anchor) / row.min() for row in positive_rows]
    return int(math.floor(min(caps) + 1e-12))


def _projection_match(phi: np.ndarray, points: np.ndarray, target: np.ndarray, tol: float) -> np.ndarray:
    proj = phi @ points.astype(float)
    if tol == 0.0:
        return np.all(proj == target[:, None], axis=0)
    return np.all(np.abs(proj - target[:, None]) <= tol, axis=0)


def collision_set(matrix, anchor, x_max=None, tol: Optional[float] = None) -> CollisionSet:
    """Enumerate every lattice point in the box that collides with ``anchor``.

    Integer matrices compare projections exactly; real matrices within 1e-9.
    The box is certified complete when a strictly positive row bounds all
    possible members inside it.
    """
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    anchor = np.asarray(anchor, dtype=np.int64)
    if anchor.shape != (phi.shape[1],) or np.any(anchor < 0):
        raise ValueError("anchor must be a nonnegative integer vector matching the columns")
    integer_matrix = bool(np.all(phi == np.rint(phi)))
    if tol is None:
        tol = 0.0 if integer_matrix else 1e-9

    certified = _certified_cap(phi, anchor)
    if x_max is None:
        if certified is None:
            raise ValueError("no certified box available: pass x_max explicitly")
        cap = max(certified, int(anchor.max(initial=0)))
    else:
        cap = int(x_max.x_max if isinstance(x_max, LatticeBound) else x_max)
    if np.any(anchor > cap):
        raise ValueError("anchor lies outside the enumeration box")
    lattice = enumerate_lattice(phi.shape[1], cap)
    target = phi @ anchor.astype(float)
    hits = _projection_match(phi, lattice, target, tol)
    members = lattice[:, hits].T.copy()
    complete = certified is not None and cap >= certified
    return CollisionSet(anchor, members, complete, cap)


def collision_partition(matrix, x_max, tol: Optional[float] = None) -> list:
    """Partition the whole box into collision sets (anchor = lexicographically first member)."""
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    integer_matrix = bool(np.all(phi == np.rint(phi)))
    if tol is None:
        tol = 0.0 if integer_matrix else 1e-9
    cap = int(x_max.x_max if isinstance(x_max, LatticeBound) else x_max)
    lattice = enumerate_lattice(phi.shape[1], cap)
    proj = phi @ lattice.astype(float)
    keys = proj if tol == 0.0 else np.round(proj / max(tol, 1e-300)) * tol
    _, first_index, labels = np.unique(keys, axis=1, return_index=True, return_inverse=True)
    sets = []
    for group in range(first_index.size):
        members = lattice[:, labels == group].T.copy()
        anchor = members[0]
        certified = _certified_cap(phi, anchor)
        complete = certified is not None and cap >= certified
        sets.append(CollisionSet(anchor, members, complete, cap))
    return sets


def onehot_singleton_exists(matrix, x_max=None) -> Optional[int]:
    """Index of a column whose one-hot signal collides with nothing, or None.

    Requires the two identifiability premises up front and raises if either
    fails. Returns None only when every candidate's box was inconclusive.
    """
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not nullspace_positive_check(phi):
        raise ValueError("matrix fails the nonnegative-nullspace premise")
    if not distinct_columns_check(phi):
        raise ValueError("matrix has duplicate columns")
    for j in range(phi.shape[1]):
        anchor = np.zeros(phi.shape[1], dtype=np.int64)
        anchor[j] = 1
        found = collision_set(phi, anchor, x_max)
        if found.is_singleton() and found.box_complete:
            return j
    return None


# ---------------------------------------------------------------------------
# Fisher information


@dataclass(frozen=True)
class FisherReport:
    """Numeric Fisher diagonal on the support, with two loss computations.

    ``loss`` integrates the pairwise-difference form (nonnegative by
    construction); ``loss_direct`` subtracts the numeric diagonal from the
    numerically integrated ideal diagonal. They agree up to float rounding.
    """

    support: np.ndarray
    diag_ideal: np.ndarray
    diag_numeric: np.ndarray
    loss: np.ndarray
    loss_direct: np.ndarray
    metadata: dict = field(default_factory=dict)


def _support_lattice(lam: np.ndarray, x_max) -> tuple:
    support = np.flatnonzero(lam > 0)
    if support.size == 0:
        raise ValueError("rates must have at least one positive entry")
    if x_max is None:
        cap = LatticeBound.for_rates(lam).x_max
    else:
        cap = int(x_max.x_max if isinstance(x_max, LatticeBound) else x_max)
    lattice = enumerate_lattice(support.size, cap)
    return support, cap, lattice


def fisher_diag_numeric(rates, matrix, noise_variance: float, x_max=None,
                        points_per_sigma: float = 8.0, pad_sigmas: float = 6.0,
                        max_points: int = 2_000_000, tail_tol: float = 1e-6,
                        agreement_tol: float = 1e-6, chunk: int = 4096) -> FisherReport:
    """Trapezoid-quadrature Fisher diagonal for single-sensor systems.

    Enumerates latent signals on the support box, integrates the squared
    score against the mixture density over a grid padded ``pad_sigmas``
    noise widths beyond the extreme projections, and cross-checks the two
    loss routes against each other.
    """
    lam_full = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    if phi.shape[0] != 1:
        raise ValueError("quadrature route is for single-sensor systems; use fisher_diag_mc")
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    support, cap, lattice = _support_lattice(lam_full, x_max)
    lam = lam_full[support]
    tail = poisson_tail_mass(lam, cap)
    if tail > tail_tol:
        raise FisherAccuracyError(f"Poisson tail mass {tail:.3e} above {tail_tol:.1e}; raise x_max")

    sigma = math.sqrt(noise_variance)
    proj = (phi[:, support] @ lattice.astype(float)).ravel()
    lo = proj.min() - pad_sigmas * sigma
    hi = proj.max() + pad_sigmas * sigma
    n_points = int(math.ceil((hi - lo) / sigma * points_per_sigma)) + 1
    if n_points > max_points:
        raise FisherAccuracyError(
            f"grid would need {n_points} points (cap {max_points}); widen the spacing")
    n_points = max(n_points, 201)
    grid = np.linspace(lo, hi, n_points)

    prior = np.exp(poisson_log_pmf_columns(lattice, lam))
    counts = lattice.astype(float)
    sq_diff = (counts[:, :, None] - counts[:, None, :]) ** 2  # (k, K, K)

    k = support.size
    numeric = np.zeros((n_points, k))
    ideal = np.zeros((n_points, k))
    pair = np.zeros((n_points, k))
    density = np.zeros(n_points)
    norm_const = 1.0 / math.sqrt(2.0 * math.pi * noise_variance)
    for start in range(0, n_points, chunk):
        y = grid[start:start + chunk]
        w = norm_const * np.exp(-(y[:, None] - proj[None, :]) ** 2 / (2.0 * noise_variance))
        w *= prior[None, :]
        m0 = w.sum(axis=1)
        density[start:start + chunk] = m0
        live = m0 > 0
        for idx in range(k):
            v = counts[idx]
            score = np.zeros_like(m0)
            score[live] = (w[live] @ v) / (m0[live] * lam[idx]) - 1.0
            numeric[start:start + chunk, idx] = score**2 * m0
            ideal[start:start + chunk, idx] = w @ ((v / lam[idx] - 1.0) ** 2)
            pair_sum = ((w @ sq_diff[idx]) * w).sum(axis=1)  # ordered pairs
            with np.errstate(invalid="ignore", divide="ignore"):
                contrib = 0.5 * pair_sum / (m0 * lam[idx] ** 2)
            pair[start:start + chunk, idx] = np.where(live, contrib, 0.0)

    diag_numeric = np.trapezoid(numeric, grid, axis=0)
    diag_ideal_numeric = np.trapezoid(ideal, grid, axis=0)
    loss_pair = np.trapezoid(pair, grid, axis=0)
    loss_direct = diag_ideal_numeric - diag_numeric
    normalization = float(np.trapezoid(density, grid))

    gap = np.abs(loss_direct - loss_pair)
    allowed = np.maximum(agreement_tol * np.maximum(np.abs(loss_direct), np.abs(loss_pair)),
                         1e-10 * diag_ideal_numeric)
    if np.any(gap > allowed):
        raise FisherAccuracyError(
            f"loss routes disagree: gap {gap.max():.3e} beyond tolerance")

    return FisherReport(
        support=support,
        diag_ideal=1.0 / lam,
        diag_numeric=diag_numeric,
        loss=loss_pair,
        loss_direct=loss_direct,
        metadata={
            "method": "quadrature",
            "n_points": n_points,
            "grid_lo": lo,
            "grid_hi": hi,
            "x_max": cap,
            "tail_mass": tail,
            "normalization": normalization,
            "diag_ideal_numeric": diag_ideal_numeric,
            "loss_agreement_gap": gap,
        },
    )


def fisher_diag_mc(rates, matrix, noise_variance: float, x_max=None,
                   n_draws: int = 1_000_000, rng: Optional[np.random.Generator] = None,
                   chunk: int = 20_000) -> FisherReport:
    """Monte Carlo Fisher diagonal for any sensor count, with standard errors."""
    from .model import sample_poisson_counts

    lam_full = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    phi = np.atleast_2d(np.asarray(matrix, dtype=float))
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if rng is None:
        rng = np.random.default_rng()
    support, cap, lattice = _support_lattice(lam_full, x_max)
    lam = lam_full[support]
    tail = poisson_tail_mass(lam, cap)

    prior = np.exp(poisson_log_pmf_columns(lattice, lam))
    counts = lattice.astype(float)
    proj = phi[:, support] @ counts  # (M, K)
    sigma = math.sqrt(noise_variance)
    k = support.size
    sums = np.zeros(k)
    sq_sums = np.zeros(k)
    done = 0
    while done < n_draws:
        take = min(chunk, n_draws - done)
        signals = sample_poisson_counts(lam, take, rng).astype(float)
        y = phi[:, support] @ signals + rng.normal(0.0, sigma, (phi.shape[0], take))
        d2 = (np.sum(y**2, axis=0)[:, None] - 2.0 * y.T @ proj
              + np.sum(proj**2, axis=0)[None, :])
        w = np.exp(-np.maximum(d2, 0.0) / (2.0 * noise_variance)) * prior[None, :]
        m0 = w.sum(axis=1)
        live = m0 > 0
        for idx in range(k):
            score = np.zeros(take)
            score[live] = (w[live] @ counts[idx]) / (m0[live] * lam[idx]) - 1.0
            sums[idx] += float((score**2).sum())
            sq_sums[idx] += float((score**4).sum())
        done += take
    diag_numeric = sums / n_draws
    variance = np.maximum(sq_sums / n_draws - diag_numeric**2, 0.0)
    standard_error = np.sqrt(variance / n_draws)
    diag_ideal = 1.0 / lam
    loss = diag_ideal - diag_numeric
    return FisherReport(
        support=support,
        diag_ideal=diag_ideal,
        diag_numeric=diag_numeric,
        loss=loss,
        loss_direct=loss,
        metadata={
            "method": "monte_carlo",
            "n_draws": n_draws,
            "x_max": cap,
            "tail_mass": tail,
            "standard_error": standard_error,
        },
    )


# ---------------------------------------------------------------------------
# small-rate kernel analysis


@dataclass(frozen=True)
class JensenKernel:
    """Gaussian similarity kernel over sensor columns, index 0 = empty signal."""

    matrix: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.matrix, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError("kernel must be square")
        object.__setattr__(self, "matrix", k)

    @property
    def n_dims(self) -> int:
        return self.matrix.shape[0] - 1


def jensen_kernel(sensing_matrix, noise_variance: float) -> JensenKernel:
    """Kernel entries exp(-||phi_i - phi_j||^2 / (4 sigma^2)) over columns plus the zero column."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    phi = np.atleast_2d(np.asarray(sensing_matrix, dtype=float))
    extended = np.hstack([np.zeros((phi.shape[0], 1)), phi])
    sq = np.sum(extended**2, axis=0)
    d2 = sq[:, None] - 2.0 * extended.T @ extended + sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    return JensenKernel(np.exp(-d2 / (4.0 * noise_variance)))


class TildeKappa(NamedTuple):
    diag: float
    zero_pair: float  # one index is the empty signal
    off_pair: float


def tilde_kappa(n_sensors: int, noise_variance: float) -> TildeKappa:
    """Closed-form limit of the group-averaged kernel for standard-normal sensors."""
    if n_sensors < 1:
        raise ValueError("n_sensors must be >= 1")
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    zero_pair = (2.0 * noise_variance / (2.0 * noise_variance + 1.0)) ** (n_sensors / 2.0)
    off_pair = (noise_variance / (noise_variance + 1.0)) ** (n_sensors / 2.0)
    return TildeKappa(1.0, zero_pair, off_pair)


def closed_form_group_kernel(n_dims: int, n_sensors: int, noise_variance: float) -> JensenKernel:
    """The infinite-group kernel assembled from the closed-form entries."""
    diag, zero_pair, off_pair = tilde_kappa(n_sensors, noise_variance)
    k = np.full((n_dims + 1, n_dims + 1), off_pair)
    k[0, :] = zero_pair
    k[:, 0] = zero_pair
    np.fill_diagonal(k, diag)
    return JensenKernel(k)


@dataclass(frozen=True)
class JensenMaximizerResult:
    closed_form: np.ndarray  # length N+1, normalized to sum 1
    numeric: np.ndarray
    interior: bool  # closed form stayed nonnegative
    condition_number: float


def _extend_rates(rates) -> np.ndarray:
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    total = lam.sum()
    if total > 1.0 + 1e-12:
        raise ValueError("small-scale analysis needs rates summing to at most 1")
    return np.concatenate([[max(1.0 - total, 0.0)], lam])


def _maximize_mixture_weights(kernel: np.ndarray, weights: np.ndarray,
                              tol: float = 1e-10, max_iters: int = 30_000) -> np.ndarray:
    """Projected gradient ascent of sum_i weights_i log(K[:, i] . lam) on the simplex."""
    n = kernel.shape[0]
    lam = np.full(n, 1.0 / n)
    active = weights > 0  # zero-probability outcomes contribute nothing

    def value(v):
        mix = kernel.T[active] @ v
        if np.any(mix <= 0):
            return -math.inf
        return float(weights[active] @ np.log(mix))

    def grad(v):
        mix = kernel.T[active] @ v
        return kernel[:, active] @ (weights[active] / mix)

    fx = value(lam)
    step = 1.0
    stalled = 0
    for _ in range(max_iters):
        g = grad(lam)
        if np.linalg.norm(project_simplex(lam + g) - lam) < tol:
            break
        moved = False
        step = min(step * 2.0, 1e4)
        while step > 1e-16:
            candidate = project_simplex(lam + step * g)
            fc = value(candidate)
            if fc >= fx + 1e-4 * g @ (candidate - lam) and fc >= fx:
                stalled = stalled + 1 if fc - fx <= 1e-16 * max(1.0, abs(fx)) else 0
                lam, fx = candidate, fc
                moved = True
                break
            step *= 0.5
        if not moved or stalled >= 50:
            break
    return lam


def jensen_maximizer(rates, kernel: JensenKernel) -> JensenMaximizerResult:
    """Closed-form and numeric maximizers of the kernel mixture bound.

    The closed form assumes the maximizer is interior (all entries positive);
    a negative entry flips the ``interior`` flag and leaves the numeric
    simplex solution as the authoritative answer.
    """
    k = kernel.matrix
    lam_ext = _extend_rates(rates)
    if lam_ext.shape[0] != k.shape[0]:
        raise ValueError("kernel size and rate vector disagree")
    condition = float(np.linalg.cond(k))
    if condition > 1e12:
        raise ValueError(f"kernel condition number {condition:.3e} too large to invert")
    inv_ones = np.linalg.solve(k, np.ones_like(lam_ext))
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.linalg.solve(k, lam_ext / inv_ones)
    total = raw.sum()
    if total <= 0 or not np.all(np.isfinite(raw)):
        closed = np.full_like(raw, math.nan)
        interior = False
    else:
        closed = raw / total
        interior = bool(np.all(closed >= -1e-12))
    numeric = _maximize_mixture_weights(k, lam_ext)
    return JensenMaximizerResult(closed, numeric, interior, condition)


@dataclass(frozen=True)
class AffineRecoveryReport:
    kendall_tau: float
    slope: float
    intercept: float
    r_squared: float
    degenerate: bool
    maximizer: np.ndarray  # length N+1


def affine_recovery_check(rates, n_sensors: int, noise_variance: float, n_groups: int,
                          rng: Optional[np.random.Generator] = None,
                          kernel: Optional[JensenKernel] = None) -> AffineRecoveryReport:
    """Rank and affine agreement between the kernel maximizer and the true rates.

    Draws ``n_groups`` standard-normal sensor groups, averages their kernels,
    maximizes the mixture bound numerically, and regresses the maximizer on
    the true rates. Pass an explicit ``kernel`` (e.g. the closed-form limit)
    to skip the sampling.
    """
    lam = rates.values if isinstance(rates, PoissonRates) else np.asarray(rates, dtype=float)
    n = lam.shape[0]
    if kernel is None:
        if rng is None:
            rng = np.random.default_rng()
        if n_groups < 1:
            raise ValueError("n_groups must be >= 1")
        accum = np.zeros((n + 1, n + 1))
        for _ in range(n_groups):
            columns = rng.normal(0.0, 1.0, (n_sensors, n))
            accum += jensen_kernel(columns, noise_variance).matrix
        kernel = JensenKernel(accum / n_groups)
    result = jensen_maximizer(lam, kernel)
    estimate = result.numeric[1:]

    degenerate = bool(np.ptp(lam) == 0)
    if degenerate:
        tau = math.nan
    else:
        tau = float(stats.kendalltau(lam, estimate).statistic)
    design = np.column_stack([lam, np.ones(n)])
    coeffs, *_ = np.linalg.lstsq(design, estimate, rcond=None)
    fitted = design @ coeffs
    ss_res = float(np.sum((estimate - fitted) ** 2))
    ss_tot = float(np.sum((estimate - estimate.mean()) ** 2))
    r_squared = math.nan if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return AffineRecoveryReport(tau, float(coeffs[0]), float(coeffs[1]), r_squared,
                                degenerate, result.numeric)
