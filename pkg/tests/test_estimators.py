import math
from fractions import Fraction

import numpy as np
import pytest

from rwre import models
from rwre.errors import EstimatorError
from rwre.estimators import clt, cycles, perturbation, renewal, scaling, zchain
from rwre.estimators.stats import EstimateWithError, ScanResult, fit_exponent, mean_se, ratio_se

DESK_V = np.array([9 / 8, 1 / 4])
DESK_D = np.array([[7 / 64, -1 / 32], [-1 / 32, 7 / 16]])


# velocity and diffusion

def test_velocity_point_mass_exact():
    est = cycles.estimate_velocity(models.point_mass(), 1000, 1)
    assert est.v.tolist() == [1.0, 0.0]
    assert est.se.tolist() == [0.0, 0.0]


def test_velocity_two_jump():
    est = cycles.estimate_velocity(models.two_jump(), 10**5, 2)
    assert np.all(np.abs(est.v - 0.5) <= 3 * est.se)


def test_velocity_desk_exact_value():
    est = cycles.estimate_velocity(models.desk(), 2 * 10**5, 3)
    assert np.all(np.abs(est.v - DESK_V) <= 4 * est.se)


def test_velocity_is_chunk_independent():
    a = cycles.estimate_velocity(models.desk(), 70000, 9)
    b = cycles.estimate_velocity(models.desk(), 70001, 9)
    # the first 70000 cycles are shared, so the estimates differ by one cycle only
    assert np.all(np.abs(a.v - b.v) < 1e-4)


def test_diffusion_point_mass_zero():
    est = cycles.estimate_diffusion(models.point_mass(), 1000, 1)
    assert np.array_equal(est.matrix, np.zeros((2, 2)))


def test_diffusion_two_jump():
    est = cycles.estimate_diffusion(models.two_jump(), 10**5, 4)
    target = np.array([[0.25, -0.25], [-0.25, 0.25]])
    assert np.all(np.abs(est.matrix - target) <= 3 * est.se)


def test_diffusion_two_jump_degenerate_direction_exact():
    est = cycles.estimate_diffusion(models.two_jump(), 10**4, 4)
    q, qse = est.quadratic_form([1, 1])
    assert q == 0.0 and qse == 0.0


def test_diffusion_two_jump_diagonal():
    est = cycles.estimate_diffusion(models.two_jump_diagonal(), 10**5, 5)
    target = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert np.all(np.abs(est.matrix - target) <= np.maximum(3 * est.se, 1e-12))


def test_diffusion_desk_exact_value():
    est = cycles.estimate_diffusion(models.desk(), 2 * 10**5, 6)
    assert np.all(np.abs(est.matrix - DESK_D) <= 4 * est.se)
    assert np.allclose(est.matrix, est.matrix.T)


def test_desk_exact_oracle():
    # one cycle of the desk model is one step (every step gains a level)
    steps = {(1, 0): Fraction(3, 8), (1, 1): Fraction(3, 8), (1, -1): Fraction(1, 8), (2, 0): Fraction(1, 8)}
    v = [sum(p * z[i] for z, p in steps.items()) for i in range(2)]
    assert v == [Fraction(9, 8), Fraction(1, 4)]
    cov = [[sum(p * (z[i] - v[i]) * (z[j] - v[j]) for z, p in steps.items()) for j in range(2)] for i in range(2)]
    assert cov == [[Fraction(7, 64), Fraction(-1, 32)], [Fraction(-1, 32), Fraction(7, 16)]]


# equilibrium

def test_equilibrium_one():
    est = cycles.estimate_equilibrium(models.lazy_desk(), "one", 0, 10**4, 1)
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_equilibrium_drift_level_point_mass():
    est = cycles.estimate_equilibrium(models.point_mass(), "drift_level", 0, 1000, 1)
    assert est.value == 1.0


def test_equilibrium_drift_matches_velocity():
    m = models.lazy_desk()
    eq = cycles.estimate_equilibrium(m, "drift", 0, 10**5, 7)
    vel = cycles.estimate_velocity(m, 10**5, 8)
    comb = np.sqrt(np.asarray(eq.std_error) ** 2 + vel.se**2)
    assert np.all(np.abs(np.asarray(eq.value) - vel.v) <= 4 * comb)


def test_unknown_functional():
    with pytest.raises(EstimatorError):
        cycles.estimate_equilibrium(models.desk(), "nope", 0, 10, 1)


# sigma tail

def test_sigma_tail_degenerate_when_every_step_gains():
    scan = cycles.sigma_tail(models.desk(), 10**4, 1)
    assert scan.flag == "degenerate"
    assert all(p[1] == 0 for p in scan.points)
    assert scan.fitted_exponent == -math.inf


def test_sigma_tail_geometric_rate():
    scan = cycles.sigma_tail(models.geometric(), 10**5, 2, n_max=12)
    rate, rate_se = scan.extra["rate"], scan.extra["rate"] * scan.exponent_se
    assert abs(rate - 0.5) <= 3 * rate_se
    assert scan.fitted_exponent + 3 * scan.exponent_se < 0


# scans

def test_variance_scan_deterministic_environment():
    scan = scaling.variance_scan(models.two_jump(), [4, 8, 16], 5, 1)
    assert scan.flag == "degenerate"
    assert all(p[1] == 0 for p in scan.points)


def test_variance_scan_se_shrinks_with_more_environments():
    ns = [8, 16]
    small = scaling.variance_scan(models.desk(), ns, 100, 3)
    large = scaling.variance_scan(models.desk(), ns, 400, 3)
    for (_, _, s1), (_, _, s2) in zip(small.points, large.points):
        assert 2.0 < (s1 / s2) ** 2 < 8.0  # expected 4


def test_intersection_point_mass_control():
    scan = scaling.intersection_scan(models.point_mass(), [8, 16, 32], 10, 1)
    assert [p[1] for p in scan.points] == [8.0, 16.0, 32.0]
    assert scan.fitted_exponent == pytest.approx(1.0)
    assert scan.extra["control"] == "inelliptic"


def test_intersections_decrease_with_start_distance():
    m = models.desk()
    means = [scaling.pair_intersections(m, 64, 0, 1000, 5, (0, k)).mean() for k in (0, 2, 6)]
    assert means[0] > means[1] > means[2]


def test_h_parallel_rays_and_shared_origin():
    assert scaling.estimate_h(models.point_mass(), (0, 5), 10, 1).value == 0
    h0 = scaling.estimate_h(models.desk(), (0, 0), 1000, 1)
    assert h0.value >= 1


def test_h_requires_zero_level():
    with pytest.raises(EstimatorError):
        scaling.estimate_h(models.desk(), (1, 0), 10, 1)


# difference chain

def test_q_point_mass_control():
    est = zchain.estimate_q(models.point_mass(), (0, 3), 100, 1)
    assert est.mean_increment.tolist() == [0.0, 0.0]
    assert est.holding_prob == 1.0


def test_q_martingale_desk():
    est = zchain.estimate_q(models.desk(), (0, 1), 2 * 10**4, 11)
    assert np.all(np.abs(est.mean_increment) <= 3 * est.mean_increment_se)
    assert est.holding_prob < 0.6


def test_green_at_zero_horizon():
    m = models.desk()
    assert zchain.green_function(m, (0, 0), (0, 0), [0], 10, 1).points[0][1] == 1.0
    assert zchain.green_function(m, (0, 2), (0, 0), [0], 10, 1).points[0][1] == 0.0


def test_green_nondecreasing_in_n():
    scan = zchain.green_function(models.desk(), (0, 0), (0, 0), [0, 4, 16, 64], 2000, 3)
    vals = [p[1] for p in scan.points]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert scan.fitted_exponent is not None


# renewal

def test_renewal_diagonal_identity():
    ls = renewal.sample_common_level({1: 0.5, 2: 0.5}, 5, 5, 0, 1000, 1)
    assert np.all(ls == 5)


def test_renewal_unit_steps():
    est = renewal.renewal_common_level({1: 1.0}, 0, 0, 100, 1, 1)
    assert est.value == 1.0 and est.std_error == 0.0


def _tree_mean(depth=20):
    # exhaustive expectation of L_{0,0} for Y uniform on {1,2}: advance the laggard (process 0 on ties)
    total = 0.0
    residual = 0.0

    def go(a, b, p, k):
        nonlocal total, residual
        if a == b and a >= 1:
            total += p * a
            return
        if k == depth:
            residual += p
            return
        if a <= b:
            go(a + 1, b, p / 2, k + 1)
            go(a + 2, b, p / 2, k + 1)
        else:
            go(a, b + 1, p / 2, k + 1)
            go(a, b + 2, p / 2, k + 1)

    go(0, 0, 1.0, 0)
    return total, residual


def test_renewal_tree_oracle():
    exact, residual = _tree_mean()
    assert residual < 1e-5
    est = renewal.renewal_common_level({1: 0.5, 2: 0.5}, 0, 0, 10**5, 1, 3)
    assert abs(est.value - exact) <= 4 * est.std_error + 50 * residual


def test_renewal_rejects_bad_input():
    with pytest.raises(EstimatorError):
        renewal.renewal_common_level({1: 0.5, 2: 0.5}, 0, 0, 10, 0.5, 1)
    with pytest.raises(EstimatorError):
        renewal.sample_common_level({2: 1.0}, 0, 3, 0, 10, 1)


# CLT battery

def test_clt_point_mass():
    rep = clt.clt_test(models.point_mass(), 1, 100, 50, 2, (1, 0), np.zeros((2, 2)))
    assert np.array_equal(rep.covariance, np.zeros((2, 2)))


def test_clt_two_jump_covariance():
    target = np.array([[0.25, -0.25], [-0.25, 0.25]])
    rep = clt.clt_test(models.two_jump(), 1, 10**4, 10**4, 2, (0.5, 0.5), target, [1000, 10**4])
    assert rep.frobenius_rel <= 0.10
    assert max(rep.ks) <= 0.02


def test_lattice_ks_binomial():
    rs = np.random.default_rng(0)
    assert clt.lattice_ks(rs.binomial(400, 0.5, size=20000)) < 0.02
    assert clt.lattice_ks(2 * rs.binomial(400, 0.5, size=20000)) < 0.02
    # bimodal three-point law is far from normal even at half-span midpoints
    assert clt.lattice_ks(rs.choice([0, 1, 2], p=[0.45, 0.1, 0.45], size=20000)) > 0.1


# perturbation

def test_perturbation_unreachable():
    left, right = perturbation.perturbation_influence(models.desk(), (3, -5), 10, 2, 5, 1)
    assert np.all(left.value == 0) and np.all(right.value == 0)


def test_perturbation_single_component():
    left, right = perturbation.perturbation_influence(models.two_jump(), (2, 1), 8, 2, 5, 1)
    assert np.all(left.value == 0)
    assert np.all(right.value > 0)


def test_perturbation_bound_holds_on_small_grid():
    rows = []
    for z in [(2, 0), (3, 1), (4, -2)]:
        left, right = perturbation.perturbation_influence(models.desk(), z, 10, 2, 20, 7)
        rows += list(zip(left.value, right.value))
    assert all(l == 0 for l, r in rows if r == 0)
    c_hat = max(l / r for l, r in rows if r > 0)
    assert c_hat < 10


# stats helpers

def test_fit_exponent_exact_powers():
    ns = [16, 32, 64, 128]
    assert fit_exponent([(n, n, 1.0) for n in ns])[0] == pytest.approx(1.0)
    assert fit_exponent([(n, math.sqrt(n), 0.1) for n in ns])[0] == pytest.approx(0.5)


def test_fit_exponent_noisy_synthetic():
    rs = np.random.default_rng(1)
    ns = [2**k for k in range(4, 12)]
    pts = [(n, 3 * n**0.7 * (1 + 0.01 * rs.standard_normal()),
            0.01 * 3 * n**0.7) for n in ns]
    e, se = fit_exponent(pts)
    assert abs(e - 0.7) <= 0.05
    assert se > 0


def test_fit_exponent_rejects_bad_points():
    with pytest.raises(EstimatorError):
        fit_exponent([(1, 1, 0), (2, 0, 0), (3, 1, 0)])
    with pytest.raises(EstimatorError):
        fit_exponent([(1, 1, 0), (2, 1, 0)])


def test_estimate_containers_validate():
    with pytest.raises(EstimatorError):
        EstimateWithError(1.0, 0.1, 1)
    with pytest.raises(EstimatorError):
        EstimateWithError(1.0, -0.1, 5)
    with pytest.raises(EstimatorError):
        ScanResult([(2, 1, 0), (1, 1, 0)], None, None)


def test_ratio_se_constant_ratio():
    num = np.arange(1, 11, dtype=float)[:, None] * 2
    r, se = ratio_se(num, np.arange(1, 11, dtype=float))
    assert r[0] == 2 and se[0] == 0


def test_mean_se():
    m, se = mean_se(np.array([1.0, 3.0]))
    assert m == 2 and se == pytest.approx(1.0)
