"""Shared numerical kernels: simplex projections, projected gradient, box ascent.

These back the convex baseline solvers and the bound computations of the
integer search; none of them knows anything about the measurement model.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

__all__ = [
    "project_simplex",
    "project_nonneg_ball",
    "simplex_pg_solve",
    "simplex_least_squares",
    "maximize_concave_on_box",
    "box_tangent_bound",
]


def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Exact Euclidean projection onto {x >= 0, sum x = total} by sorting."""
    if total < 0:
        raise ValueError("total must be >= 0")
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    if total == 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    ranks = np.arange(1, v.size + 1)
    hits = np.nonzero(u * ranks > cumulative - total)[0]
    # the set is never empty in exact arithmetic; huge inputs can lose the
    # strict inequality to rounding, where all mass on the top entry is right
    rho = hits[-1] if hits.size else 0
    theta = (cumulative[rho] - total) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_nonneg_ball(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x <= total}."""
    clipped = np.maximum(np.asarray(v, dtype=float), 0.0)
    if clipped.sum() <= total:
        return clipped
    return project_simplex(v, total)


def simplex_pg_solve(
    gradient: Callable[[np.ndarray], np.ndarray],
    n_dims: int,
    total: float,
    *,
    lipschitz: float,
    inequality: bool = False,
    tol: float = 1e-9,
    max_iters: int = 50_000,
    x0: Optional[np.ndarray] = None,
    check_every: int = 10,
) -> np.ndarray:
    """Minimize a smooth convex function over a scaled simplex.

    Accelerated projected gradient with gradient-based adaptive restart;
    terminates when the projected-gradient residual
    ``||x - P(x - step * grad(x))|| / step`` drops below ``tol``.
    """
    if lipschitz <= 0 or not math.isfinite(lipschitz):
        raise ValueError("need a finite positive Lipschitz constant")
    project = (lambda v: project_nonneg_ball(v, total)) if inequality else (lambda v: project_simplex(v, total))
    step = 1.0 / lipschitz
    x = project(np.full(n_dims, total / n_dims) if x0 is None else np.asarray(x0, dtype=float))
    y = x.copy()
    momentum = 1.0
    for it in range(max_iters):
        g = gradient(y)
        if not np.all(np.isfinite(g)):
            raise ValueError("gradient produced non-finite values")
        x_new = project(y - step * g)
        if (y - x_new) @ (x_new - x) > 0:
            # momentum points uphill: restart
            y = x_new.copy()
            momentum = 1.0
        else:
            momentum_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum**2))
            y = x_new + ((momentum - 1.0) / momentum_new) * (x_new - x)
            momentum = momentum_new
        x = x_new
        if it % check_every == 0 or it == max_iters - 1:
            residual = np.linalg.norm(x - project(x - step * gradient(x))) / step
            if residual < tol:
                break
    return x


def simplex_least_squares(
    matrix: np.ndarray,
    target: np.ndarray,
    total: float,
    *,
    inequality: bool = False,
    tol: float = 1e-9,
    max_iters: int = 50_000,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Minimize 0.5 * ||A x - b||^2 over the scaled simplex."""
    matrix = np.asarray(matrix, dtype=float)
    target = np.asarray(target, dtype=float)
    gram = matrix.T @ matrix
    rhs = matrix.T @ target
    lipschitz = float(np.linalg.eigvalsh(gram)[-1])
    if lipschitz <= 0:
        # zero matrix: any feasible point is optimal
        return project_simplex(np.zeros(matrix.shape[1]), total) if not inequality else np.zeros(matrix.shape[1])
    return simplex_pg_solve(
        lambda x: gram @ x - rhs,
        matrix.shape[1],
        total,
        lipschitz=lipschitz,
        inequality=inequality,
        tol=tol,
        max_iters=max_iters,
        x0=x0,
    )


def maximize_concave_on_box(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    *,
    x0: Optional[np.ndarray] = None,
    grad_tol: float = 1e-8,
    max_iters: int = 500,
):
    """Backtracking projected gradient ascent of a concave function on a box.

    Returns ``(x, value_at_x, gradient_at_x)``. The stop rule is the norm of
    the unit-step projected gradient mapping.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip((lower + upper) / 2.0 if x0 is None else np.asarray(x0, dtype=float), lower, upper)
    fx = value(x)
    step = 1.0
    g = gradient(x)
    for _ in range(max_iters):
        if np.linalg.norm(np.clip(x + g, lower, upper) - x) < grad_tol:
            break
        moved = False
        while step > 1e-14:
            candidate = np.clip(x + step * g, lower, upper)
            fc = value(candidate)
            ascent = g @ (candidate - x)
            if fc >= fx + 1e-4 * ascent and fc >= fx:
                x, fx = candidate, fc
                g = gradient(x)
                moved = True
                break
            step *= 0.5
        if not moved:
            break
        step = min(step * 2.0, 1e12)
    return x, fx, g


def box_tangent_bound(value_at_x: float, gradient_at_x: np.ndarray, x: np.ndarray,
                      lower: np.ndarray, upper: np.ndarray) -> float:
    """Certified upper bound of a concave function over a box from one tangent."""
    spread = np.where(gradient_at_x > 0,
                      gradient_at_x * (upper - x),
                      gradient_at_x * (lower - x))
    return float(value_at_x + spread.sum())
