import math

import numpy as np
import pytest

from mmvp.likelihood import mixture_density_curve, poisson_log_pmf
from mmvp.model import sample_rates
from mmvp.theory import (
    AffineRecoveryReport,
    FisherAccuracyError,
    JensenKernel,
    closed_form_group_kernel,
    affine_recovery_check,
    collision_partition,
    collision_set,
    distinct_columns_check,
    fisher_diag_mc,
    fisher_diag_numeric,
    jensen_kernel,
    jensen_maximizer,
    nullspace_positive_check,
    onehot_singleton_exists,
    tilde_kappa,
)

PHI_123 = np.array([[1.0, 2.0, 3.0]])


# ---------------------------------------------------------------------------
# identifiability premises


def test_nullspace_check_positive_row():
    assert nullspace_positive_check(PHI_123) is True


def test_nullspace_check_signed_matrix():
    assert nullspace_positive_check(np.array([[1.0, -1.0]])) is False


def test_nullspace_check_random_uniform():
    rng = np.random.default_rng(0)
    assert nullspace_positive_check(rng.random((2, 5))) is True


def test_nullspace_check_float_witness():
    assert nullspace_positive_check(np.array([[0.5, -0.5]])) is False


def test_nullspace_check_integer_edge():
    # nullspace vector [1, 1, -1] mixes signs; the check should hold
    assert nullspace_positive_check(np.array([[1, 2, 3], [0, 1, 1]])) is True
    # but adding a column equal to another's negative breaks it
    assert nullspace_positive_check(np.array([[1, -1], [2, -2]])) is False


def test_distinct_columns():
    assert distinct_columns_check(np.array([[1.0, 1.0], [0.0, 0.0]])) is False
    assert distinct_columns_check(PHI_123) is True
    rng = np.random.default_rng(1)
    assert distinct_columns_check(rng.random((3, 10))) is True


# ---------------------------------------------------------------------------
# collision sets


def test_collision_set_for_integer_matrix():
    found = collision_set(PHI_123, np.array([0, 0, 1]))
    got = {tuple(row) for row in found.members}
    assert got == {(3, 0, 0), (1, 1, 0), (0, 0, 1)}
    assert found.box_complete
    # members listed in lexicographic order
    assert [tuple(r) for r in found.members] == sorted(tuple(r) for r in found.members)


def test_collision_set_zero_anchor_is_trivial():
    found = collision_set(PHI_123, np.zeros(3, dtype=int))
    assert found.is_singleton()
    assert np.array_equal(found.members[0], [0, 0, 0])


def test_collision_set_continuous_matrix_singletons():
    rng = np.random.default_rng(2)
    phi = rng.random((1, 4))
    for _ in range(5):
        anchor = rng.integers(0, 3, 4)
        found = collision_set(phi, anchor, x_max=6)
        assert found.is_singleton()
        assert np.array_equal(found.members[0], anchor)


def test_collision_set_anchor_must_fit_box():
    with pytest.raises(ValueError):
        collision_set(PHI_123, np.array([5, 0, 0]), x_max=3)


def test_collision_partition_covers_box_once():
    cap = 4
    sets = collision_partition(PHI_123, cap)
    seen = {}
    for cs in sets:
        for member in cs.members:
            key = tuple(member)
            assert key not in seen
            seen[key] = True
    assert len(seen) == (cap + 1) ** 3
    # classes are equivalence classes: same projection inside, different across
    projections = [float((PHI_123 @ cs.anchor)[0]) for cs in sets]
    assert len(set(projections)) == len(projections)


def test_collision_partition_zero_class_probability():
    # P(C_0 | lam) must equal exp(-sum lam) whenever C_0 = {0}
    sets = collision_partition(PHI_123, 4)
    zero_class = next(cs for cs in sets if tuple(cs.anchor) == (0, 0, 0))
    assert zero_class.is_singleton()
    lam = np.array([0.4, 0.3, 0.1])
    mass = sum(math.exp(poisson_log_pmf(m, lam)) for m in zero_class.members)
    assert mass == pytest.approx(math.exp(-lam.sum()), rel=1e-12)


def test_onehot_singleton_for_integer_design():
    # x1 + 2 x2 + 3 x3 = 1 admits only e_1
    assert onehot_singleton_exists(PHI_123) == 0


def test_onehot_singleton_for_continuous_design():
    rng = np.random.default_rng(3)
    assert onehot_singleton_exists(rng.random((2, 5)), x_max=5) is not None


def test_onehot_gate_rejects_bad_matrices():
    with pytest.raises(ValueError):
        onehot_singleton_exists(np.array([[1.0, 1.0]]), x_max=3)
    with pytest.raises(ValueError):
        onehot_singleton_exists(np.array([[1.0, -1.0]]), x_max=3)


def test_mixture_curves_distinguish_rates():
    # identifiable design: different rates produce visibly different densities
    rng = np.random.default_rng(4)
    grid = np.linspace(-1.0, 13.0, 3001)
    a = rng.random(3)
    b = rng.random(3)
    curve_a = mixture_density_curve(grid, a, PHI_123, 0.05, 8)
    curve_b = mixture_density_curve(grid, b, PHI_123, 0.05, 8)
    assert np.max(np.abs(curve_a - curve_b)) > 1e-6


# ---------------------------------------------------------------------------
# Fisher information


def test_fisher_single_rate_strictly_below_ideal():
    report = fisher_diag_numeric(np.array([0.8]), np.array([[1.0]]), 0.25)
    assert report.diag_numeric[0] < report.diag_ideal[0]
    assert report.loss[0] > 0


def test_fisher_approaches_ideal_as_noise_vanishes():
    report = fisher_diag_numeric(np.array([0.8]), np.array([[1.0]]), 1e-6)
    assert report.diag_numeric[0] == pytest.approx(1.0 / 0.8, rel=0.01)


def test_fisher_loss_nonnegative_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(5):
        n = int(rng.integers(1, 4))
        lam = np.zeros(3)
        support = rng.choice(3, size=n, replace=False)
        lam[support] = rng.uniform(0.2, 1.0, n)
        phi = rng.random((1, 3))
        report = fisher_diag_numeric(lam, phi, float(rng.uniform(0.05, 0.4)))
        assert np.all(report.loss >= -1e-8)
        assert np.all(report.loss_direct >= -1e-8)
        assert np.all(report.diag_numeric <= report.diag_ideal + 1e-6)
        # two loss routes agree (the op itself enforces this; assert the gap too)
        gap = np.abs(report.loss - report.loss_direct)
        allowed = np.maximum(1e-6 * np.maximum(np.abs(report.loss), np.abs(report.loss_direct)),
                             1e-10 * report.metadata["diag_ideal_numeric"])
        assert np.all(gap <= allowed)


def test_fisher_normalization_recorded():
    report = fisher_diag_numeric(np.array([0.5, 0.0, 0.5]), PHI_123, 0.02)
    assert report.metadata["normalization"] == pytest.approx(1.0, abs=1e-4)
    assert report.metadata["tail_mass"] < 1e-6


def test_fisher_rejects_multi_sensor_quadrature():
    with pytest.raises(ValueError):
        fisher_diag_numeric(np.array([0.5]), np.ones((2, 1)), 0.1)


def test_fisher_tail_guard_raises():
    with pytest.raises(FisherAccuracyError):
        fisher_diag_numeric(np.array([3.0]), np.array([[1.0]]), 0.1, x_max=3)


def test_fisher_mc_agrees_with_quadrature():
    lam = np.array([0.7])
    phi = np.array([[1.0]])
    quad = fisher_diag_numeric(lam, phi, 0.2)
    mc = fisher_diag_mc(lam, phi, 0.2, n_draws=200_000, rng=np.random.default_rng(6))
    se = mc.metadata["standard_error"][0]
    assert abs(mc.diag_numeric[0] - quad.diag_numeric[0]) <= 4 * se + 1e-3


# ---------------------------------------------------------------------------
# kernel analysis


def test_jensen_kernel_diagonal_and_example():
    kernel = jensen_kernel(np.array([[1.0, 2.0]]), 0.25)
    assert np.allclose(np.diag(kernel.matrix), 1.0)
    # columns 1 and 2 sit distance 1 apart: exp(-1/(4*0.25)) = e^-1
    assert kernel.matrix[1, 2] == pytest.approx(math.exp(-1.0), rel=1e-12)
    # entry against the zero column
    assert kernel.matrix[0, 1] == pytest.approx(math.exp(-1.0 / (4 * 0.25)), rel=1e-12)


def test_jensen_kernel_flattens_with_noise():
    phi = np.array([[1.0, 2.0, 4.0]])
    kernel = jensen_kernel(phi, 1e6)
    assert np.all(kernel.matrix > 0.999)


def test_jensen_maximizer_identity_kernel():
    lam = np.array([0.05, 0.0, 0.1])
    kernel = JensenKernel(np.eye(4))
    result = jensen_maximizer(lam, kernel)
    expected = np.concatenate([[1.0 - lam.sum()], lam])
    assert np.allclose(result.closed_form, expected, atol=1e-15)
    assert result.interior
    assert np.allclose(result.numeric, expected, atol=1e-6)


def spread_sensor_columns(rng, n_dims=3, radius=3.0):
    """Jittered equiangular columns: random instances whose maximizer stays interior."""
    angles = (np.arange(n_dims) * 2 * np.pi / n_dims
              + rng.uniform(-0.3, 0.3, n_dims) + rng.uniform(0, 2 * np.pi))
    radii = radius * (1.0 + rng.uniform(-0.15, 0.15, n_dims))
    return np.vstack([radii * np.cos(angles), radii * np.sin(angles)])


def test_jensen_maximizer_closed_matches_numeric():
    checked = 0
    for seed in range(8):
        rng = np.random.default_rng(40 + seed)
        raw = 0.5 + rng.random(3)
        lam = raw / raw.sum() * 0.15
        phi = spread_sensor_columns(np.random.default_rng(80 + seed))
        result = jensen_maximizer(lam, jensen_kernel(phi, 0.5))
        if result.interior:
            checked += 1
            assert np.max(np.abs(result.closed_form - result.numeric)) <= 1e-4
            # the bound maximizer is meaningfully distinct from the true rates
            assert np.max(np.abs(result.numeric[1:] - lam)) > 1e-6
    assert checked >= 6


def test_jensen_maximizer_respects_support_symmetry():
    # uniform rates and a permutation-symmetric kernel give a symmetric maximizer
    lam = np.array([0.06, 0.06, 0.06])
    kernel = closed_form_group_kernel(3, 2, 0.5)
    result = jensen_maximizer(lam, kernel)
    assert np.ptp(result.numeric[1:]) < 1e-9
    assert np.ptp(result.closed_form[1:]) < 1e-14


def test_jensen_maximizer_rejects_singular_kernel():
    lam = np.array([0.1, 0.1])
    bad = JensenKernel(np.ones((3, 3)))
    with pytest.raises(ValueError):
        jensen_maximizer(lam, bad)


def test_tilde_kappa_closed_forms():
    diag, zero_pair, off_pair = tilde_kappa(2, 1.0)
    assert diag == 1.0
    assert zero_pair == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert off_pair == pytest.approx(0.5, rel=1e-12)


def test_tilde_kappa_decreases_with_sensor_count():
    values = [tilde_kappa(m, 0.5) for m in (1, 2, 4, 8, 16)]
    zero = [v.zero_pair for v in values]
    off = [v.off_pair for v in values]
    assert all(a > b for a, b in zip(zero, zero[1:]))
    assert all(a > b for a, b in zip(off, off[1:]))


def test_tilde_kappa_matches_monte_carlo():
    rng = np.random.default_rng(8)
    m, sigma2 = 3, 0.5
    a = rng.normal(0.0, 1.0, (100_000, m))
    b = rng.normal(0.0, 1.0, (100_000, m))
    off_mc = np.exp(-np.sum((a - b) ** 2, axis=1) / (4 * sigma2)).mean()
    zero_mc = np.exp(-np.sum(a**2, axis=1) / (4 * sigma2)).mean()
    expected = tilde_kappa(m, sigma2)
    assert off_mc == pytest.approx(expected.off_pair, rel=0.01)
    assert zero_mc == pytest.approx(expected.zero_pair, rel=0.01)


def test_affine_recovery_with_closed_form_kernel():
    # enough sensors that the maximizer stays strictly positive, as the
    # affine-recovery statement requires
    lam = np.array([0.06, 0.045, 0.035, 0.04, 0.02])
    kernel = closed_form_group_kernel(5, 12, 0.5)
    report = affine_recovery_check(lam, 12, 0.5, 1, kernel=kernel)
    assert report.r_squared >= 0.999
    assert report.slope >= 0
    assert not report.degenerate


def test_affine_recovery_single_support_tops_ranking():
    lam = np.array([0.0, 0.12, 0.0, 0.0])
    kernel = closed_form_group_kernel(4, 12, 0.5)
    report = affine_recovery_check(lam, 12, 0.5, 1, kernel=kernel)
    assert int(np.argmax(report.maximizer[1:])) == 1


def test_affine_recovery_degenerate_rates_flagged():
    lam = np.full(4, 0.03)
    kernel = closed_form_group_kernel(4, 2, 0.5)
    report = affine_recovery_check(lam, 2, 0.5, 1, kernel=kernel)
    assert report.degenerate
    assert math.isnan(report.kendall_tau)


def test_affine_recovery_gains_with_groups():
    # few sensors and heavy mixing: a fully loaded categorical keeps the
    # averaged-kernel maximizer away from total collapse
    lam = np.array([0.30, 0.25, 0.20, 0.15, 0.10])
    taus = {}
    for n_groups in (1, 50):
        values = []
        for seed in range(6):
            report = affine_recovery_check(lam, 2, 0.5, n_groups,
                                           rng=np.random.default_rng(1000 + seed))
            values.append(report.kendall_tau)
        taus[n_groups] = float(np.nanmedian(values))
    assert taus[50] >= taus[1]
