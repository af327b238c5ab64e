import math

import numpy as np
import pytest

from conftest import random_points
from htype_harnack.exceptions import DomainError, SingularityError
from htype_harnack.gauge import (
    K_UPPER_BOUND,
    ball_volume,
    ball_volume_closed_form,
    estimate_K,
    euclidean_gradient_d,
    fundamental_solution_residual,
    gauge_norm,
    gauge_power_integral,
    horizontal_gradient_d,
    horizontal_gradient_phi,
    horizontal_hessian_d,
    horizontal_hessian_phi,
    mean_value_beta,
    phi,
    psi0,
    quasi_distance,
    sample_unit_sphere,
)
from htype_harnack.group import bracket, compose, dilate, exp_point, inverse, log_point
from htype_harnack.operator import horizontal_second_differences

# H^1 mean-value constant, computed once by the level-set quadrature (independent of
# the coarea Monte Carlo used by mean_value_beta) and frozen here.
BETA_H1 = 0.3183098861837907


def test_gauge_examples(H1):
    assert gauge_norm(H1, [1, 0, 0]) == 1.0
    assert gauge_norm(H1, [0, 0, 0.25]) == 1.0
    assert gauge_norm(H1, H1.origin()) == 0.0
    assert phi(H1, [1, 0, 1]) == 17.0
    assert phi(H1, H1.origin()) == 0.0


def test_gauge_homogeneity_and_symmetry(any_group, rng):
    p = random_points(any_group, rng)
    lam = rng.uniform(0.2, 5.0, size=len(p))
    d = gauge_norm(any_group, p)
    np.testing.assert_allclose(gauge_norm(any_group, dilate(any_group, lam, p)), lam * d, rtol=1e-13)
    np.testing.assert_allclose(phi(any_group, dilate(any_group, lam, p)), lam**4 * phi(any_group, p), rtol=1e-13)
    np.testing.assert_array_equal(gauge_norm(any_group, inverse(any_group, p)), d)
    assert np.all(d > 0)


def test_quasi_distance(any_group, rng):
    p, q, g = (random_points(any_group, rng, 50) for _ in range(3))
    assert np.all(quasi_distance(any_group, p, p) == 0)
    np.testing.assert_allclose(quasi_distance(any_group, p, q), quasi_distance(any_group, q, p), rtol=1e-13)
    moved = quasi_distance(any_group, compose(any_group, g, p), compose(any_group, g, q))
    np.testing.assert_allclose(moved, quasi_distance(any_group, p, q), rtol=1e-12)


def _flow_gradient(spec, f, p, h=1e-5):
    eye = np.eye(spec.m)
    out = []
    for j in range(spec.m):
        plus = f(compose(spec, p, exp_point(spec, h * eye[j])))
        minus = f(compose(spec, p, exp_point(spec, -h * eye[j])))
        out.append((plus - minus) / (2 * h))
    return np.array(out)


def test_gradient_phi_examples(H1):
    np.testing.assert_array_equal(horizontal_gradient_phi(H1, H1.origin()), [0, 0])
    np.testing.assert_allclose(horizontal_gradient_phi(H1, [1, 0, 0]), [4, 0])


def test_gradient_phi_against_flows(any_group, rng):
    for p in random_points(any_group, rng, 20):
        fd = _flow_gradient(any_group, lambda q: phi(any_group, q), p)
        exact = horizontal_gradient_phi(any_group, p)
        assert np.linalg.norm(fd - exact) <= 1e-6 * np.linalg.norm(exact)


def test_gradient_phi_norm_identity(any_group, rng):
    p = random_points(any_group, rng)
    v, _ = log_point(any_group, p)
    g = horizontal_gradient_phi(any_group, p)
    np.testing.assert_allclose(np.sum(g * g, -1), 16 * np.sum(v * v, -1) * phi(any_group, p), rtol=1e-12)


def test_gradient_d_examples_and_identity(H1, any_group, rng):
    assert np.sum(horizontal_gradient_d(H1, [1, 0, 0]) ** 2) == pytest.approx(1.0)
    assert np.sum(horizontal_gradient_d(H1, [0, 0, 0.25]) ** 2) == 0.0
    p = random_points(any_group, rng)
    v, _ = log_point(any_group, p)
    g = horizontal_gradient_d(any_group, p)
    np.testing.assert_allclose(np.sum(g * g, -1), np.sum(v * v, -1) / gauge_norm(any_group, p) ** 2, rtol=1e-12)
    with pytest.raises(SingularityError):
        horizontal_gradient_d(H1, H1.origin())


def test_hessian_phi_examples(H1):
    np.testing.assert_allclose(horizontal_hessian_phi(H1, [1, 0, 0]), 12 * np.eye(2))
    np.testing.assert_array_equal(horizontal_hessian_phi(H1, H1.origin()), np.zeros((2, 2)))


def test_hessian_phi_skew_part_is_bracket(any_group, rng):
    spec = any_group
    eye = np.eye(spec.m)
    br = np.array([[bracket(spec, eye[i], eye[j]) for j in range(spec.m)] for i in range(spec.m)])
    for p in random_points(spec, rng, 20):
        H = horizontal_hessian_phi(spec, p)
        _, z = log_point(spec, p)
        np.testing.assert_allclose(0.5 * (H - H.T), 16 * br @ z, atol=1e-12 * np.abs(H).max())


def test_hessians_against_finite_differences(any_group, rng):
    spec = any_group
    for p in random_points(spec, rng, 30):
        fd = horizontal_second_differences(lambda q: phi(spec, q), spec, p, 1e-3)
        fd = (4 * horizontal_second_differences(lambda q: phi(spec, q), spec, p, 5e-4) - fd) / 3
        exact = horizontal_hessian_phi(spec, p)
        assert np.linalg.norm(fd - exact) <= 1e-5 * np.linalg.norm(exact)
        fd_d = horizontal_second_differences(lambda q: gauge_norm(spec, q), spec, p, 1e-3)
        fd_d = (4 * horizontal_second_differences(lambda q: gauge_norm(spec, q), spec, p, 5e-4) - fd_d) / 3
        exact_d = horizontal_hessian_d(spec, p)
        assert np.linalg.norm(fd_d - exact_d) <= 1e-5 * np.linalg.norm(exact_d)


def test_hessian_d_chain_rule_and_homogeneity(any_group, rng):
    spec = any_group
    p = random_points(spec, rng)
    d = gauge_norm(spec, p)[:, None, None]
    g = horizontal_gradient_d(spec, p)
    expected = horizontal_hessian_phi(spec, p) / (4 * d**3) - 3 / d * g[:, :, None] * g[:, None, :]
    np.testing.assert_allclose(horizontal_hessian_d(spec, p), expected, rtol=1e-12, atol=1e-12)
    lam = 2.7
    np.testing.assert_allclose(horizontal_hessian_d(spec, dilate(spec, lam, p)),
                               horizontal_hessian_d(spec, p) / lam, rtol=1e-12, atol=1e-12)
    with pytest.raises(SingularityError):
        horizontal_hessian_d(spec, spec.origin())


def test_euclidean_gradient_against_central_differences(any_group, rng):
    spec = any_group.prototype()
    h = 1e-6
    for p in random_points(spec, rng, 10):
        fd = [(gauge_norm(spec, p + h * e) - gauge_norm(spec, p - h * e)) / (2 * h) for e in np.eye(spec.N)]
        np.testing.assert_allclose(fd, euclidean_gradient_d(spec, p), rtol=1e-6, atol=1e-8)


def test_psi0(H1, any_group, rng):
    assert psi0(H1, [0, 0, 0.25]) == 0.0
    p = random_points(any_group, rng)
    k = psi0(any_group, p)
    assert np.all(k >= 0)
    # the full gradient has a t-part of degree -1, so psi0 is not 0-homogeneous in general;
    # on the horizontal layer the t-part vanishes and both gradients are degree 0
    h = p.copy()
    h[:, any_group.m:] = 0.0
    np.testing.assert_allclose(psi0(any_group, dilate(any_group, 3.3, h)), psi0(any_group, h), rtol=1e-12)
    # off the horizontal layer the scaling is genuinely broken
    assert not np.allclose(psi0(any_group, dilate(any_group, 3.3, p)), k, rtol=1e-6)
    with pytest.raises(SingularityError):
        psi0(H1, H1.origin())


def test_fundamental_solution(H1, Q2, rng):
    for spec in (H1, Q2):
        p = random_points(spec, rng, 100)
        d = gauge_norm(spec, p)
        res = fundamental_solution_residual(spec, p)
        assert np.all(np.abs(res) <= 1e-8 * d ** (-spec.Q))
    with pytest.raises(SingularityError):
        fundamental_solution_residual(H1, H1.origin())


def test_ball_volume_estimators(H1, any_group):
    radial = ball_volume(H1)
    assert radial.value == pytest.approx(math.pi**2 / 8, rel=1e-10)
    rej = ball_volume(H1, method="rejection", seed=3)
    assert abs(rej.value - radial.value) / radial.value < 0.01
    closed = ball_volume_closed_form(any_group)
    assert ball_volume(any_group).value == pytest.approx(closed, rel=1e-9)


def test_ball_volume_scaling(Q2):
    one = ball_volume(Q2, method="rejection", seed=1, budget=400_000)
    two = ball_volume(Q2, method="rejection", seed=2, budget=400_000, R=2.0)
    diff = abs(two.value - 2**Q2.Q * one.value)
    assert diff <= 3 * math.hypot(two.stderr, 2**Q2.Q * one.stderr)


def test_ball_volume_small_budget_flagged(H1):
    est = ball_volume(H1, method="rejection", budget=500)
    assert est.flagged and est.stderr > 0.01 * est.value
    with pytest.raises(DomainError):
        ball_volume(H1, budget=0)


def test_unit_sphere_samples(R5, rng):
    y = sample_unit_sphere(R5.prototype(), 1000, rng)
    np.testing.assert_allclose(gauge_norm(R5.prototype(), y), 1.0, rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 3.5])
def test_layer_cake(H1, alpha):
    est = gauge_power_integral(H1, alpha, seed=4)
    exact = H1.Q * math.pi**2 / 8 / (H1.Q - alpha)
    assert abs(est.value - exact) / exact < 0.01


def test_beta_estimators_agree(any_group):
    b = mean_value_beta(any_group, seed=5)
    assert b.beta > 0
    assert b.relative_disagreement < 0.01


def test_beta_pinned_h1(H1):
    b = mean_value_beta(H1, seed=6)
    assert abs(b.beta - BETA_H1) <= 3 * b.stderr
    assert b.beta_surface == pytest.approx(BETA_H1, rel=1e-9)


def test_beta_R_independence(H1):
    b1 = mean_value_beta(H1, seed=7, R=1.0)
    b2 = mean_value_beta(H1, seed=8, R=2.0)
    assert abs(b1.beta - b2.beta) <= 3 * math.hypot(b1.stderr, b2.stderr)
    assert b2.beta_surface == pytest.approx(b1.beta_surface, rel=1e-9)


def test_estimate_K(H1):
    K, sup = estimate_K(H1, samples=10_000, seed=0, return_sup=True)
    assert 1.0 <= K <= 1.05 * K_UPPER_BOUND
    assert K == pytest.approx(max(1.0, 1.05 * sup))
    K4 = estimate_K(H1, samples=40_000, seed=1)
    assert abs(K4 - K) / K <= 0.02


def test_horizontal_collinear_ratio(H1, rng):
    a = rng.uniform(0.1, 2, size=(100, 1)) * np.array([[0.6, 0.8, 0.0]])
    b = rng.uniform(0.1, 2, size=(100, 1)) * np.array([[0.6, 0.8, 0.0]])
    ratio = gauge_norm(H1, compose(H1, a, b)) / (gauge_norm(H1, a) + gauge_norm(H1, b))
    assert np.all(ratio <= 1 + 1e-15)


def test_quasi_triangle_with_estimated_K(Q2, rng):
    K = estimate_K(Q2, samples=10_000, seed=2)
    p, q, r = (Q2.from_frame(rng.normal(size=(100_000, Q2.N)) * rng.exponential(size=(100_000, 1)))
               for _ in range(3))
    lhs = quasi_distance(Q2, p, r)
    rhs = K * (quasi_distance(Q2, p, q) + quasi_distance(Q2, q, r))
    assert np.all(lhs <= rhs)
