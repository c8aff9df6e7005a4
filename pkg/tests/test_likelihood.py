import math

import numpy as np
import pytest
from scipy import special

from mmvp.likelihood import (
    LatticeBound,
    enumerate_lattice,
    exact_log_likelihood_small,
    log_density_y_given_x,
    mc_log_likelihood,
    mixture_density_curve,
    poisson_log_pmf,
    poisson_log_pmf_columns,
    poisson_tail_mass,
)
from mmvp.model import MeasurementBatch, PoissonRates, SensingEnsemble


def single_group_batch(y_values, noise_variance):
    y = np.atleast_2d(np.asarray(y_values, dtype=float))
    return MeasurementBatch(y, np.ones(y.shape[1], dtype=int), noise_variance)


FIG2_PHI = np.array([[1.0, 2.0, 3.0]])
FIG2_ENSEMBLE = SensingEnsemble((FIG2_PHI,))


def test_log_density_zero_residual():
    phi = np.array([[2.0]])
    assert log_density_y_given_x([2.0], [1.0], phi, 1.0) == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_log_density_unit_residual():
    phi = np.array([[1.0]])
    # residual 1 at sigma^2 = 0.5: -(1/2) log(pi) - 1
    assert log_density_y_given_x([2.0], [1.0], phi, 0.5) == pytest.approx(-0.5 * math.log(math.pi) - 1.0)


def test_log_density_rejects_zero_variance():
    with pytest.raises(ValueError):
        log_density_y_given_x([1.0], [1.0], np.array([[1.0]]), 0.0)


def test_log_density_integrates_to_one():
    phi = np.array([[1.0, 2.0]])
    x = np.array([1.0, 1.0])
    sigma2 = 0.3
    grid = np.linspace(3.0 - 8.0, 3.0 + 8.0, 20001)
    dens = np.exp([log_density_y_given_x([y], x, phi, sigma2) for y in grid])
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


def test_log_density_permutation_invariant():
    rng = np.random.default_rng(0)
    phi = rng.random((3, 5))
    x = rng.integers(0, 4, 5).astype(float)
    y = rng.random(3)
    perm = rng.permutation(5)
    a = log_density_y_given_x(y, x, phi, 0.1)
    b = log_density_y_given_x(y, x[perm], phi[:, perm], 0.1)
    assert a == pytest.approx(b, rel=1e-12)


def test_poisson_log_pmf_zero_vector():
    lam = np.array([0.5, 1.0, 0.5])
    assert poisson_log_pmf(np.zeros(3, dtype=int), lam) == pytest.approx(-2.0)


def test_poisson_log_pmf_mixed():
    assert poisson_log_pmf(np.array([1, 0]), np.array([0.5, 0.5])) == pytest.approx(math.log(0.5) - 1.0)


def test_poisson_log_pmf_impossible_event():
    assert poisson_log_pmf(np.array([1]), np.array([0.0])) == -math.inf
    assert poisson_log_pmf(np.array([0]), np.array([0.0])) == 0.0


def test_poisson_log_pmf_rejects_negative_counts():
    with pytest.raises(ValueError):
        poisson_log_pmf(np.array([-1]), np.array([1.0]))


def test_lattice_mass_covers_poisson_up_to_tail():
    lam = np.array([0.7, 0.2])
    for cap in (2, 5, 8):
        lattice = enumerate_lattice(2, cap)
        mass = special.logsumexp(poisson_log_pmf_columns(lattice, lam))
        tail = poisson_tail_mass(lam, cap)
        assert mass >= math.log(1.0 - tail) - 1e-12
        assert mass <= 1e-12


def test_lattice_bound_tail_rule():
    bound = LatticeBound.for_rates(np.array([0.5, 1.0]), tail_mass=1e-9)
    assert bound.x_max >= 3
    assert poisson_tail_mass(np.array([1.0]), bound.x_max) < 1e-8
    assert LatticeBound.for_rates(np.zeros(2)).x_max == 3


def test_exact_log_likelihood_single_point_lattice():
    # with x_max = 0 the only term is p(y|0) * exp(-sum(lam))
    rng = np.random.default_rng(1)
    y = rng.normal(0.0, 0.5, size=6)
    batch = single_group_batch(y, 0.25)
    ens = SensingEnsemble((np.array([[1.0]]),))
    got = exact_log_likelihood_small(batch, ens, np.array([1.0]), 0)
    direct = np.mean([log_density_y_given_x([v], [0.0], np.array([[1.0]]), 0.25) for v in y]) - 1.0
    assert got.value == pytest.approx(direct, rel=1e-12)


def test_exact_log_likelihood_monotone_in_cap():
    rng = np.random.default_rng(2)
    y = rng.normal(2.0, 1.0, size=12)
    batch = single_group_batch(y, 0.02)
    lam = np.array([0.5, 0.0, 0.5])
    smaller = exact_log_likelihood_small(batch, FIG2_ENSEMBLE, lam, 2).value
    larger = exact_log_likelihood_small(batch, FIG2_ENSEMBLE, lam, 10).value
    assert larger >= smaller


def test_exact_log_likelihood_guard():
    batch = single_group_batch([1.0], 0.1)
    ens = SensingEnsemble((np.ones((1, 12)),))
    with pytest.raises(ValueError):
        exact_log_likelihood_small(batch, ens, np.full(12, 0.5), 6)


def test_mc_log_likelihood_degenerate_sampler():
    # all-zero rates can only propose x = 0
    y = np.array([5.0])
    batch = single_group_batch(y, 1.0)
    ens = SensingEnsemble((np.array([[1.0, 1.0]]),))
    got = mc_log_likelihood(batch, ens, np.zeros(2), 50, np.random.default_rng(3))
    assert got.value == pytest.approx(log_density_y_given_x(y, np.zeros(2), ens.matrices[0], 1.0))
    assert got.n_skipped == 0


def test_mc_log_likelihood_all_columns_skipped():
    y = np.array([1e6])
    batch = single_group_batch(y, 1e-4)
    ens = SensingEnsemble((np.array([[1.0]]),))
    got = mc_log_likelihood(batch, ens, np.array([0.1]), 20, np.random.default_rng(4))
    assert math.isnan(got.value)
    assert got.n_skipped == 1
    assert got.n_used == 0


def fig2_batch(seed=0, n_observations=400):
    rng = np.random.default_rng(seed)
    from mmvp.model import measure, sample_signals

    signals = sample_signals(PoissonRates([0.5, 0.0, 0.5]), n_observations, rng)
    return measure(FIG2_ENSEMBLE, signals, 0.02, np.ones(n_observations, dtype=int), rng)


def test_mc_matches_exact_enumeration():
    batch = fig2_batch(seed=5, n_observations=100)
    lam = np.array([0.4, 0.1, 0.6])
    exact = exact_log_likelihood_small(batch, FIG2_ENSEMBLE, lam, 8).value
    approx = mc_log_likelihood(batch, FIG2_ENSEMBLE, lam, 100_000, np.random.default_rng(6))
    assert approx.n_skipped == 0
    assert abs(approx.value - exact) <= 0.05


def test_mc_error_shrinks_with_samples():
    batch = fig2_batch(seed=7, n_observations=50)
    lam = np.array([0.5, 0.05, 0.45])
    exact = exact_log_likelihood_small(batch, FIG2_ENSEMBLE, lam, 9).value
    wins = 0
    for seed in range(20):
        small = mc_log_likelihood(batch, FIG2_ENSEMBLE, lam, 100, np.random.default_rng(100 + seed))
        large = mc_log_likelihood(batch, FIG2_ENSEMBLE, lam, 100_000, np.random.default_rng(200 + seed))
        if abs(large.value - exact) <= abs(small.value - exact):
            wins += 1
    assert wins >= 19


def test_mixture_curve_requires_single_sensor():
    with pytest.raises(ValueError):
        mixture_density_curve(np.linspace(0, 1, 5), np.array([0.5]), np.ones((2, 1)), 0.1, 4)


def test_mixture_curve_integrates_to_one():
    lam = np.array([0.5, 0.0, 0.5])
    cap = LatticeBound.for_rates(lam, tail_mass=1e-8)
    grid = np.linspace(-1.0, 14.0, 6001)
    dens = mixture_density_curve(grid, lam, FIG2_PHI, 0.02, cap)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


def test_mixture_curve_zero_rates_is_noise_bump():
    grid = np.linspace(-1.0, 1.0, 2001)
    sigma2 = 0.04
    dens = mixture_density_curve(grid, np.zeros(3), FIG2_PHI, sigma2, 3)
    expected = np.exp(-grid**2 / (2 * sigma2)) / math.sqrt(2 * math.pi * sigma2)
    assert np.allclose(dens, expected, rtol=1e-10, atol=1e-12)


def test_mixture_curve_has_lattice_modes():
    # weight concentrates near the projected lattice points 0, 1, 3, 4, ...
    lam = np.array([0.5, 0.0, 0.5])
    grid = np.linspace(-0.5, 4.5, 2001)
    dens = mixture_density_curve(grid, lam, FIG2_PHI, 0.02, 8)
    for mode in (0.0, 1.0, 3.0, 4.0):
        at_mode = dens[np.argmin(np.abs(grid - mode))]
        between = dens[np.argmin(np.abs(grid - (mode + 0.5)))]
        assert at_mode > 5 * between
    # y = 2 needs two events from index 0 or one from index 1: much rarer
    assert dens[np.argmin(np.abs(grid - 1.0))] > dens[np.argmin(np.abs(grid - 2.0))]
