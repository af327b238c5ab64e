import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_points
from htype_harnack.exceptions import DomainError, SingularityError, StructureError
from htype_harnack.gauge import gauge_norm, horizontal_hessian_d, phi
from htype_harnack.group import dilate, heisenberg
from htype_harnack.operator import (
    CoefficientField,
    EllipticityBounds,
    apply_LA_closed_form_d,
    apply_LA_fd,
    apply_LA_hessian_d,
    apply_LA_phi,
    check_ellipticity,
    constant_field,
    contract,
    delta_from_ratio,
    diagonal_ramp_field,
    identity_field,
    landis_delta_field,
    landis_delta_pointwise,
    landis_sample_points,
    pullback_field,
    random_ball_points,
    random_smooth_field,
    ratio_field,
    rotating_field,
)


def random_spd(rng, m, lam, Lam, count=None):
    """Matrices ``O diag O^T`` with eigenvalues drawn in ``[lam, Lam]`` (endpoints included)."""
    shape = () if count is None else (count,)
    O, _ = np.linalg.qr(rng.normal(size=shape + (m, m)))
    eig = rng.uniform(lam, Lam, size=shape + (m,))
    eig[..., 0] = lam
    eig[..., -1] = Lam
    A = O @ (eig[..., :, None] * np.swapaxes(O, -1, -2))
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def test_bounds_validation():
    assert EllipticityBounds(1.0, 2.0).ratio == 2.0
    with pytest.raises(DomainError):
        EllipticityBounds(2.0, 1.0)
    with pytest.raises(DomainError):
        EllipticityBounds(0.0, 1.0)


def test_check_ellipticity_examples(H1, rng):
    pts = random_points(H1, rng, 20)
    assert check_ellipticity(identity_field(2), pts).passed
    rep = check_ellipticity(constant_field(np.diag([1.0, 3.0]), EllipticityBounds(1.0, 2.0)), pts)
    assert not rep.passed
    assert len(rep.failures) == 20
    assert all(f[3] == pytest.approx(1.0) for f in rep.failures)
    assert rep.max_excess == pytest.approx(1.0)
    fld = random_smooth_field(2, 3, EllipticityBounds(0.5, 2.0), rng)
    assert check_ellipticity(fld, random_points(H1, rng, 500)).passed
    with pytest.raises(DomainError):
        check_ellipticity(identity_field(2), np.zeros((0, 3)))


def test_check_ellipticity_rejects_asymmetric(H1):
    skewed = CoefficientField(lambda p: np.broadcast_to([[1.0, 0.5], [0.0, 1.0]], (len(p), 2, 2)),
                              EllipticityBounds(0.5, 2.0), 2)
    with pytest.raises(StructureError):
        check_ellipticity(skewed, [[0.1, 0.2, 0.3]])


def test_field_shape_checked():
    bad = CoefficientField(lambda p: np.zeros((len(p), 3, 3)), EllipticityBounds(1, 1), 2)
    with pytest.raises(StructureError):
        bad.evaluate([[0.0, 0.0, 0.0]])


def test_field_factories(H1, rng):
    pts = random_points(H1, rng, 200)
    for fld in (diagonal_ramp_field([1, 1], [1, 1.3]), rotating_field([1, 1.3], rate=2.0),
                ratio_field(2, 1.0, 1.3)):
        A = fld.evaluate(pts)
        assert A.shape == (200, 2, 2)
        assert check_ellipticity(fld, pts).passed
    ramp = diagonal_ramp_field([1, 1], [1, 1.5])
    np.testing.assert_allclose(ramp.evaluate([[1.0, 0, 0]])[0], np.diag([1, 1.5]))
    np.testing.assert_allclose(ramp.evaluate([[-1.0, 0, 0]])[0], np.eye(2))
    with pytest.raises(StructureError):
        rotating_field([1.0])


def test_pullback_field(H1, rng):
    fld = random_smooth_field(2, 3, EllipticityBounds(0.5, 2.0), rng)
    x0 = np.array([0.2, -0.1, 0.3])
    pb = pullback_field(H1, fld, x0, 0.5)
    np.testing.assert_allclose(pb.evaluate(H1.origin()[None]), fld.evaluate(x0[None]))
    assert pb.bounds == fld.bounds


def test_landis_pointwise_examples():
    for m, Q in [(2, 4), (4, 6), (4, 10), (6, 8)]:
        assert landis_delta_pointwise(np.eye(m), Q) == 2.0
    for Lam in (1.0, 1.2, 1.4, 1.5):
        assert landis_delta_pointwise(np.diag([1.0, Lam]), 4) == pytest.approx(7 - 5 * Lam, abs=1e-14)
    assert landis_delta_pointwise(np.diag([1.0, 1.4]), 4) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        landis_delta_pointwise(np.diag([1.0, -1.0]), 4)
    with pytest.raises(StructureError):
        landis_delta_pointwise(np.array([[1.0, 1.0], [0.0, 1.0]]), 4)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**31))
def test_landis_invariances(c, seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, 4, 0.7, 1.3)
    O, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    base = landis_delta_pointwise(A, 6)
    assert landis_delta_pointwise(c * A, 6) == pytest.approx(base, abs=1e-12)
    assert landis_delta_pointwise(O.T @ A @ O, 6) == pytest.approx(base, abs=1e-12)


def test_landis_field(H1):
    pts = landis_sample_points(H1, 256, seed=1)
    assert len(pts) == 256
    assert np.all(gauge_norm(H1, pts) < 1)
    rep = landis_delta_field(identity_field(2), pts, H1.Q)
    assert rep.delta == 2.0 and rep.satisfied
    ramp = diagonal_ramp_field([1, 1], [1, 1.5])
    rep = landis_delta_field(ramp, landis_sample_points(H1, 256, seed=1, extra=[[1.0, 0, 0]]), H1.Q)
    assert rep.delta == pytest.approx(-0.5)
    assert not rep.satisfied
    np.testing.assert_array_equal(rep.worst_point, [1.0, 0, 0])
    with pytest.raises(DomainError):
        landis_delta_field(identity_field(2), np.zeros((0, 3)), 4)


def test_delta_from_ratio():
    assert delta_from_ratio(EllipticityBounds(2.0, 2.0), 4) == 2.0
    assert delta_from_ratio(EllipticityBounds(5.0, 7.0), 4) == pytest.approx(0.0, abs=1e-14)
    assert delta_from_ratio(EllipticityBounds(1.0, 1.2), 6) > 0
    assert delta_from_ratio(EllipticityBounds(1.0, 1.4), 6) < 0


@pytest.mark.parametrize("m,Q", [(2, 4), (4, 6), (4, 10), (8, 14)])
def test_ratio_bound_is_lower_bound(rng, m, Q):
    bounds = EllipticityBounds(0.8, 1.1)
    A = random_spd(rng, m, bounds.lam, bounds.Lam, count=2000)
    assert np.all(landis_delta_pointwise(A, Q) >= delta_from_ratio(bounds, Q) - 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_symmetric_skew_contraction_vanishes(seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, 5, 0.5, 3.0)
    S = rng.normal(size=(5, 5))
    S = S - S.T
    assert abs(contract(A, S)) <= 1e-13 * np.abs(A).max() * np.abs(S).max()


def test_closed_form_d_matches_hessian_contraction(any_group, rng):
    fld = random_smooth_field(any_group.m, any_group.N, EllipticityBounds(0.5, 2.0), rng)
    p = random_points(any_group, rng, 100)
    closed = apply_LA_closed_form_d(fld, any_group, p)
    hess = apply_LA_hessian_d(fld, any_group, p)
    np.testing.assert_allclose(closed, hess, rtol=1e-12)


def test_skew_block_contributes_nothing(any_group, rng):
    spec = any_group
    fld = random_smooth_field(spec.m, spec.N, EllipticityBounds(0.5, 2.0), rng)
    p = random_points(spec, rng, 100)
    H = horizontal_hessian_d(spec, p)
    skew = 0.5 * (H - np.swapaxes(H, -1, -2))
    assert np.all(np.abs(contract(fld.evaluate(p), skew)) <= 1e-13 * np.abs(H).max(axis=(-1, -2)))


def test_closed_form_d_vertical_point(H1):
    assert apply_LA_closed_form_d(identity_field(2), H1, [[0, 0, 0.3]])[0] == 0.0
    with pytest.raises(SingularityError):
        apply_LA_closed_form_d(identity_field(2), H1, H1.origin()[None])


def test_closed_form_d_homogeneity(any_group, rng):
    A = random_spd(rng, any_group.m, 0.5, 2.0)
    fld = constant_field(A)
    p = random_points(any_group, rng, 50)
    lam = 1.7
    np.testing.assert_allclose(apply_LA_closed_form_d(fld, any_group, dilate(any_group, lam, p)),
                               apply_LA_closed_form_d(fld, any_group, p) / lam, rtol=1e-11)


def test_LA_phi_examples(H1):
    assert apply_LA_phi(identity_field(2), H1, H1.origin()) == 0.0
    assert apply_LA_phi(identity_field(2), H1, [1.0, 0, 0]) == pytest.approx(24.0)
    assert apply_LA_fd(identity_field(2), lambda q: phi(H1, q), H1, np.array([1.0, 0, 0])) == pytest.approx(24.0, rel=1e-8)


def test_LA_phi_bound(any_group, rng):
    spec = any_group
    bounds = EllipticityBounds(0.6, 1.4)
    p = random_ball_points(spec, 10_000, rng)
    A = random_spd(rng, spec.m, bounds.lam, bounds.Lam, count=len(p))
    fld = CoefficientField(lambda q: A[: len(q)], bounds, spec.m)
    vals = apply_LA_phi(fld, spec, p)
    assert np.all(vals <= 4 * (spec.Q + 2) * bounds.Lam + 1e-10)


def test_LA_fd_against_closed_forms(any_group, rng):
    spec = any_group
    fld = random_smooth_field(spec.m, spec.N, EllipticityBounds(0.5, 2.0), rng)
    for p in random_points(spec, rng, 15):
        exact = apply_LA_phi(fld, spec, p)
        fd = apply_LA_fd(fld, lambda q: phi(spec, q), spec, p)
        assert abs(fd - exact) <= 1e-6 * abs(exact)
        const = apply_LA_fd(fld, lambda q: np.ones(len(q)), spec, p)
        assert const == 0.0


def test_LA_fd_fundamental_solution(H1, Q2, rng):
    for spec in (H1, Q2):
        fld = identity_field(spec.m)
        for p in random_points(spec, rng, 10, lo=0.5, hi=1.5):
            d = gauge_norm(spec, p)
            val = apply_LA_fd(fld, lambda q: gauge_norm(spec, q) ** (2 - spec.Q), spec, p, step=1e-3)
            assert abs(val) <= 1e-6 * d ** (-spec.Q)


def test_LA_fd_step_underflow(H1):
    with pytest.raises(DomainError):
        apply_LA_fd(identity_field(2), lambda q: phi(H1, q), H1, np.array([1.0, 0, 0]), step=1e-12)


def test_r5_closed_form_uses_orthonormal_frame(R5, rng):
    # the rescaled frame is orthonormal, so the identity operator is the sub-Laplacian there
    p = random_points(R5, rng, 20)
    vals = apply_LA_fd(identity_field(R5.m), lambda q: gauge_norm(R5, q) ** (2 - R5.Q), R5, p[0], step=1e-3)
    assert abs(vals) <= 1e-6 * gauge_norm(R5, p[0]) ** (-R5.Q)
    assert heisenberg(1).m == 2
