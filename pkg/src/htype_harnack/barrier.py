"""Singular-potential barrier, its smoothing, and the constants of the critical density estimate.

For ``O`` inside ``B_1(0)`` and ``alpha = Q - delta``::

    h(x)     = -1/alpha int_O d(x^{-1} o xi)^{-alpha} dxi
    h_eps(x) = -1/alpha int_O eta_eps(d(x^{-1} o xi)) d(x^{-1} o xi)^{-alpha} dxi

All integrals are taken in the variable ``eta = x^{-1} o xi`` (Haar measure is
invariant), written in gauge-polar form ``eta = delta_r(omega)`` with
``dxi = Q |B_1| r^{Q-1} dr dsigma_c(omega)``, and sampled with ``r`` drawn from a
density that cancels the radial singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .exceptions import DomainError, PreconditionError
from .gauge import (
    DEFAULT_BUDGET,
    K_UPPER_BOUND,
    Estimate,
    GaugeConstants,
    ball_volume,
    gauge_constants,
    gauge_norm,
    gauge_power_integral,
    horizontal_gradient_d,
    horizontal_hessian_d,
    quasi_distance,
    sample_unit_sphere,
)
from .group import HTypeGroupSpec, compose, dilate, inverse
from .operator import (
    CoefficientField,
    EllipticityBounds,
    LandisReport,
    landis_delta_field,
    landis_sample_points,
)

TOLERANCE = 0.1


# ----------------------------------------------------------------- cutoff


def _smooth_step(s):
    """``e(s) / (e(s) + e(1-s))`` with ``e(s) = exp(-1/s)``, plus first two derivatives."""
    s = np.asarray(s, dtype=float)
    val = np.where(s >= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    mid = (s > 0) & (s < 1)
    if np.any(mid):
        t = s[mid]
        sig = expit(1.0 / (1.0 - t) - 1.0 / t)
        w = sig * (1.0 - sig)
        q = 1.0 / t**2 + 1.0 / (1.0 - t) ** 2
        dq = -2.0 / t**3 + 2.0 / (1.0 - t) ** 3
        first = w * q
        val[mid] = sig
        d1[mid] = first
        d2[mid] = first * (1.0 - 2.0 * sig) * q + w * dq
    return val, d1, d2


def eta_eps(rho, eps: float):
    """Smooth cutoff: 0 on ``[0, eps)``, 1 on ``[2 eps, inf)``, monotone and C-infinity."""
    if not eps > 0:
        raise DomainError("cutoff scale must be positive")
    return _smooth_step((np.asarray(rho, dtype=float) - eps) / eps)[0]


def eta_eps_derivatives(rho, eps: float):
    """``(eta, eta', eta'')`` with respect to ``rho``."""
    if not eps > 0:
        raise DomainError("cutoff scale must be positive")
    v, d1, d2 = _smooth_step((np.asarray(rho, dtype=float) - eps) / eps)
    return v, d1 / eps, d2 / eps**2


# ----------------------------------------------------------------- regions


@dataclass(frozen=True, eq=False)
class Region:
    """Open set given by an indicator on chart points and a bounding gauge ball."""

    indicator: Callable[[np.ndarray], np.ndarray]
    center: np.ndarray
    radius: float
    boundary_sampler: Callable | None = None
    volume: float | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, p.shape[-1])
        return np.asarray(self.indicator(flat), dtype=bool).reshape(p.shape[:-1])


def _sphere_points(spec, center, radius, count, rng):
    om = spec.from_frame(sample_unit_sphere(spec.prototype(), count, rng))
    return compose(spec, center, dilate(spec, radius, om))


def ball_region(spec: HTypeGroupSpec, center, radius: float) -> Region:
    """Gauge ball ``center o B_radius(0)``."""
    center = np.asarray(center, dtype=float)
    vol = radius**spec.Q * ball_volume(spec).value

    def indicator(p):
        return quasi_distance(spec, p, center) < radius

    def boundary(count, rng):
        return _sphere_points(spec, center, radius, count, rng)

    return Region(indicator, center, float(radius), boundary, vol, "ball",
                  {"center": center.tolist(), "radius": float(radius)})


def ball_minus_ball(spec: HTypeGroupSpec, center, radius: float, hole_center, hole_radius: float) -> Region:
    """``B_radius(center)`` with the closed ball ``B_hole_radius(hole_center)`` removed."""
    center = np.asarray(center, dtype=float)
    hole_center = np.asarray(hole_center, dtype=float)

    def indicator(p):
        return (quasi_distance(spec, p, center) < radius) & (quasi_distance(spec, p, hole_center) > hole_radius)

    def boundary(count, rng):
        outer = _sphere_points(spec, center, radius, count, rng)
        outer = outer[quasi_distance(spec, outer, hole_center) >= hole_radius]
        inner = _sphere_points(spec, hole_center, hole_radius, count, rng)
        inner = inner[quasi_distance(spec, inner, center) <= radius]
        return np.concatenate([outer, inner])

    return Region(indicator, center, float(radius), boundary, None, "ball_minus_ball",
                  {"center": center.tolist(), "radius": float(radius),
                   "hole_center": hole_center.tolist(), "hole_radius": float(hole_radius)})


def region_volume(spec: HTypeGroupSpec, region: Region, budget: int = 200_000, seed: int = 0) -> Estimate:
    if region.volume is not None:
        return Estimate(region.volume, 0.0)
    rng = np.random.default_rng(seed)
    proto = spec.prototype()
    om = sample_unit_sphere(proto, budget, rng)
    r = region.radius * rng.uniform(size=budget) ** (1.0 / spec.Q)
    pts = compose(spec, region.center, spec.from_frame(dilate(proto, r, om)))
    hit = region.contains(pts).astype(float)
    vol = region.radius**spec.Q * ball_volume(spec).value
    return Estimate(vol * hit.mean(), vol * hit.std() / math.sqrt(budget), budget)


def check_inside_unit_ball(spec: HTypeGroupSpec, region: Region, samples: int = 20_000, seed: int = 0) -> float:
    """Sampled ``sup d`` over ``O``; raises if ``O`` leaves ``B_1(0)``."""
    rng = np.random.default_rng(seed)
    proto = spec.prototype()
    om = sample_unit_sphere(proto, samples, rng)
    r = region.radius * rng.uniform(size=samples) ** (1.0 / spec.Q)
    pts = compose(spec, region.center, spec.from_frame(dilate(proto, r, om)))
    pts = pts[region.contains(pts)]
    if len(pts) == 0:
        raise DomainError("region has (numerically) zero measure")
    sup = float(gauge_norm(spec, pts).max())
    if sup >= 1.0:
        raise DomainError(f"region is not contained in B_1(0): sampled gauge reaches {sup:.4f}")
    return sup


def ball_test_points(spec: HTypeGroupSpec, center, radius: float, count: int = 12, seed: int = 0):
    """Center, points on the sphere of the given radius and at half radius (closed ball sample)."""
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=float)
    half = count // 2
    outer = _sphere_points(spec, center, radius, count - 1 - half, rng)
    inner = _sphere_points(spec, center, 0.5 * radius, half, rng)
    return np.concatenate([center[None], outer, inner])


def set_distance(spec: HTypeGroupSpec, inner_points, region: Region, samples: int = 4000, seed: int = 0) -> float:
    """Sampled ``inf d(xi^{-1} o x)`` over test points ``x`` and ``xi`` on the boundary of ``O``."""
    if region.boundary_sampler is None:
        raise DomainError("region has no boundary sampler")
    rng = np.random.default_rng(seed)
    bnd = region.boundary_sampler(samples, rng)
    x = np.asarray(inner_points, dtype=float)
    dist = quasi_distance(spec, x[:, None, :], bnd[None, :, :])
    return float(dist.min())


# ----------------------------------------------------------------- config


@dataclass(frozen=True, eq=False)
class BarrierConfig:
    region: Region
    delta: float
    eps: float
    budget: int = 200_000
    seed: int = 0
    strata: int = 64

    def __post_init__(self):
        if not 0 < self.delta <= 2:
            raise DomainError("delta must lie in (0, 2]")
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.budget < self.strata:
            raise DomainError("budget must cover every stratum")

    def alpha(self, spec: HTypeGroupSpec) -> float:
        return spec.Q - self.delta


# -------------------------------------------------------------- quadrature


def _stratified_uniform(rng, n, strata):
    per = max(n // strata, 1)
    k = np.repeat(np.arange(strata), per)
    return (k + rng.uniform(size=len(k))) / strata, k


def _stratified_mean(vals, labels, strata):
    """Mean and standard error for equal-allocation stratified samples (vals may be 2-D)."""
    vals = np.asarray(vals, dtype=float)
    shape = (strata, -1) + vals.shape[1:]
    grouped = vals.reshape(shape)
    means = grouped.mean(axis=1)
    var = grouped.var(axis=1, ddof=1) / grouped.shape[1]
    return means.mean(axis=0), np.sqrt(var.sum(axis=0)) / strata


def _truncation_radius(spec, x, region):
    # d(x^{-1} o xi) <= 2^{1/4} (d(x^{-1} o c) + radius) for xi in the bounding ball
    return K_UPPER_BOUND * (float(quasi_distance(spec, region.center, x)) + region.radius) * (1 + 1e-9)


def _barrier_integral(x, config, spec, cutoff: bool) -> Estimate:
    x = np.asarray(x, dtype=float)
    proto = spec.prototype()
    Q, delta = spec.Q, config.delta
    alpha = Q - delta
    rng = np.random.default_rng(config.seed)
    rmax = _truncation_radius(spec, x, config.region)
    u, labels = _stratified_uniform(rng, config.budget, config.strata)
    om = sample_unit_sphere(proto, len(u), rng)
    # density of r proportional to r^{delta-1} on (0, rmax]
    r = rmax * u ** (1.0 / delta)
    eta = dilate(proto, r, om)
    xi = compose(proto, spec.to_frame(x), eta)
    vals = config.region.contains(spec.from_frame(xi)).astype(float)
    if cutoff:
        vals = vals * eta_eps(r, config.eps)
    mean, err = _stratified_mean(vals, labels, config.strata)
    scale = Q * ball_volume(spec).value * rmax**delta / delta / alpha
    return Estimate(-scale * float(mean), scale * float(err), len(u))


def barrier_h(x, config: BarrierConfig, spec: HTypeGroupSpec) -> Estimate:
    """Monte Carlo value of ``h(x)`` with its standard error."""
    return _barrier_integral(x, config, spec, cutoff=False)


def barrier_h_eps(x, config: BarrierConfig, spec: HTypeGroupSpec) -> Estimate:
    return _barrier_integral(x, config, spec, cutoff=True)


@dataclass(frozen=True)
class KernelSamples:
    """Weighted samples of ``Y_i Y_j g_eps`` at ``eta``, shared by all test points."""

    eta: np.ndarray
    weighted_hessian: np.ndarray
    labels: np.ndarray
    strata: int


def kernel_hessian_samples(config: BarrierConfig, spec: HTypeGroupSpec, rmax: float) -> KernelSamples:
    """Samples of ``Q|B_1| Z r^{alpha+2} Y_iY_j g_eps(delta_r omega)`` with ``r ~ r^{delta-3}`` on ``[eps, rmax]``.

    ``g_eps = -1/alpha eta_eps(d) d^{-alpha}``; the weight makes the integrand
    bounded so the estimator has finite variance.
    """
    proto = spec.prototype()
    Q, delta, eps = spec.Q, config.delta, config.eps
    alpha = Q - delta
    if rmax <= eps:
        raise DomainError("truncation radius below the cutoff scale")
    rng = np.random.default_rng(config.seed)
    u, labels = _stratified_uniform(rng, config.budget, config.strata)
    kappa = delta - 2.0
    if abs(kappa) < 1e-12:
        r = eps * (rmax / eps) ** u
        Z = math.log(rmax / eps)
    else:
        lo, hi = eps**kappa, rmax**kappa
        r = (lo + u * (hi - lo)) ** (1.0 / kappa)
        Z = (hi - lo) / kappa
    om = sample_unit_sphere(proto, len(u), rng)
    eta = dilate(proto, r, om)
    cut, dcut, d2cut = eta_eps_derivatives(r, eps)
    # G(rho) = -1/alpha eta_eps(rho) rho^{-alpha}
    G1 = -(dcut * r**-alpha - alpha * cut * r ** (-alpha - 1)) / alpha
    G2 = -(d2cut * r**-alpha - 2 * alpha * dcut * r ** (-alpha - 1) + alpha * (alpha + 1) * cut * r ** (-alpha - 2)) / alpha
    g = horizontal_gradient_d(proto, eta)
    H = horizontal_hessian_d(proto, eta)
    hess = G2[:, None, None] * g[:, :, None] * g[:, None, :] + G1[:, None, None] * H
    weight = Q * ball_volume(spec).value * Z * r ** (alpha + 2)
    return KernelSamples(eta, weight[:, None, None] * hess, labels, config.strata)


def LA_h_eps(fld: CoefficientField, x, config: BarrierConfig, spec: HTypeGroupSpec, samples: KernelSamples | None = None) -> Estimate:
    """``L_A h_eps(x)`` by differentiating under the integral sign.

    ``L_A h_eps(x) = int 1_O(x o eta^{-1}) sum a_ij(x) (Y_i Y_j g_eps)(eta) deta``.
    """
    x = np.asarray(x, dtype=float)
    if samples is None:
        samples = kernel_hessian_samples(config, spec, _truncation_radius(spec, x, config.region))
    proto = spec.prototype()
    A = fld.evaluate(x[None])[0]
    xi = compose(proto, spec.to_frame(x), inverse(proto, samples.eta))
    inside = config.region.contains(spec.from_frame(xi))
    vals = np.einsum("ij,sij->s", A, samples.weighted_hessian) * inside
    mean, err = _stratified_mean(vals, samples.labels, samples.strata)
    return Estimate(float(mean), float(err), len(vals))


# --------------------------------------------------------------- constants


def theoretical_C(beta: float, K: float, delta: float) -> float:
    """Lower-bound constant ``1 / (beta (2K)^{2-delta})``."""
    if not (beta > 0 and K >= 1 and 0 < delta <= 2):
        raise DomainError("need beta > 0, K >= 1, 0 < delta <= 2")
    return 1.0 / (beta * (2.0 * K) ** (2.0 - delta))


def gamma_layer_cake(spec: HTypeGroupSpec, delta: float, ball_vol: float | None = None) -> float:
    """``Q / (alpha delta) |B_1|^{alpha/Q}`` (exact by homogeneity of the measure)."""
    Q = spec.Q
    alpha = Q - delta
    vol = ball_volume(spec).value if ball_vol is None else ball_vol
    return Q / (alpha * delta) * vol ** (alpha / Q)


def lower_bound_gamma(spec: HTypeGroupSpec, delta: float, constants: GaugeConstants | None = None,
                      budget: int = DEFAULT_BUDGET, seed: int = 0) -> Estimate:
    """``gamma = 1/alpha int_{B_1} d^{-alpha} |B_1|^{-delta/Q}`` by quadrature, so ``h >= -gamma |O|^{delta/Q}``."""
    Q = spec.Q
    alpha = Q - delta
    vol = ball_volume(spec).value if constants is None else constants.ball_volume
    integral = gauge_power_integral(spec, alpha, budget=budget, seed=seed)
    f = vol ** (-delta / Q) / alpha
    return Estimate(f * integral.value, f * integral.stderr, integral.samples)


def critical_density_epsilon(C: float, gamma: float, Q: int, bounds: EllipticityBounds, delta: float) -> float:
    """Measure fraction ``(7C/(128 gamma (Q+2)) lam/Lam)^{Q/delta}`` of the critical density estimate."""
    if not (C > 0 and gamma > 0 and delta > 0):
        raise DomainError("constants must be positive")
    eps = (7.0 * C / (128.0 * gamma * (Q + 2)) * bounds.lam / bounds.Lam) ** (Q / delta)
    if not eps < 1:
        raise DomainError(f"critical density fraction {eps:.4g} >= 1: constants inconsistent")
    return eps


@dataclass(frozen=True)
class ConstantChain:
    C: float
    gamma: float
    epsilon_cd: float
    c_cd: float = 0.5
    delta: float = 2.0
    K_sensitivity: float = 0.0

    def as_dict(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "epsilon_cd": self.epsilon_cd, "c_cd": self.c_cd,
                "delta": self.delta, "dlogC_dlogK": self.K_sensitivity}


def constant_chain(spec: HTypeGroupSpec, bounds: EllipticityBounds, delta: float, constants: GaugeConstants,
                   budget: int = DEFAULT_BUDGET, seed: int = 0) -> ConstantChain:
    C = theoretical_C(constants.beta, constants.K, delta)
    gamma = lower_bound_gamma(spec, delta, constants, budget=budget, seed=seed).value
    eps = critical_density_epsilon(C, gamma, spec.Q, bounds, delta)
    return ConstantChain(C, gamma, eps, 0.5, delta, -(2.0 - delta))


# ------------------------------------------------------------ verification


@dataclass
class BarrierVerdict:
    margin_min: float
    stderr: float
    verdict: str
    C: float
    beta: float
    K: float
    delta: float
    eps: float
    values: list
    stderrs: list
    failing_points: list
    landis: LandisReport | None = None

    def as_dict(self) -> dict:
        return {
            "margin_min": self.margin_min,
            "stderr": self.stderr,
            "verdict": self.verdict,
            "C": self.C,
            "beta": self.beta,
            "K": self.K,
            "delta": self.delta,
            "eps": self.eps,
            "LA_h_eps": self.values,
            "LA_h_eps_stderr": self.stderrs,
            "failing_points": self.failing_points,
        }


def landis_gate(fld: CoefficientField, spec: HTypeGroupSpec, test_points, delta: float | None = None,
                seed: int = 0) -> tuple[float, LandisReport]:
    """Landis margin of the field on the test points plus a Sobol fill of ``B_1(0)``.

    Returns the ``delta`` to use; raises :class:`PreconditionError` if the field
    has no positive margin or a smaller one than requested.
    """
    pts = landis_sample_points(spec, 2048, seed=seed, extra=test_points)
    report = landis_delta_field(fld, pts, spec.Q)
    if not report.satisfied:
        raise PreconditionError(f"field violates the Cordes-Landis condition (delta = {report.delta:.4g})")
    if delta is None:
        delta = min(report.delta, 2.0)
    elif delta > report.delta + 1e-12:
        raise PreconditionError(f"requested delta {delta} exceeds the field's margin {report.delta:.4g}")
    return delta, report


def verify_barrier_lemma(fld: CoefficientField, spec: HTypeGroupSpec, region: Region, test_points,
                         delta: float | None = None, eps: float | None = None,
                         constants: GaugeConstants | None = None, budget: int = 200_000, seed: int = 0,
                         tolerance: float = TOLERANCE) -> BarrierVerdict:
    """Check ``L_A h_eps >= C lam`` at the test points.

    The relative margin is ``(L_A h_eps - C lam) / lam``; ``pass`` when its minimum
    is at least ``-tolerance``, ``inconclusive`` when the standard error exceeds
    both the tolerance and the magnitude of the margin.
    """
    test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
    delta, landis = landis_gate(fld, spec, test_points, delta, seed)
    check_inside_unit_ball(spec, region, seed=seed)
    dist = set_distance(spec, test_points, region, seed=seed)
    if eps is None:
        eps = 0.4 * dist
    if not 2 * eps < dist:
        raise PreconditionError(f"cutoff 2*eps = {2 * eps:.4g} not below distance {dist:.4g} to the boundary")
    if constants is None:
        constants = gauge_constants(spec, seed=seed)
    C = theoretical_C(constants.beta, constants.K, delta)
    lam = fld.bounds.lam
    config = BarrierConfig(region, delta, eps, budget=budget, seed=seed)
    rmax = max(_truncation_radius(spec, x, region) for x in test_points)
    samples = kernel_hessian_samples(config, spec, rmax)
    values, errs, margins = [], [], []
    for x in test_points:
        est = LA_h_eps(fld, x, config, spec, samples)
        values.append(est.value)
        errs.append(est.stderr)
        margins.append((est.value - C * lam) / lam)
    margins = np.array(margins)
    i = int(np.argmin(margins))
    margin, err = float(margins[i]), float(errs[i] / lam)
    failing = [test_points[k].tolist() for k in np.nonzero(margins < -tolerance)[0]]
    # noise larger than both the slack and the margin itself cannot decide the sign
    if err > max(tolerance, abs(margin)):
        verdict = "inconclusive"
    elif margin >= -tolerance:
        verdict = "pass"
    else:
        verdict = "fail"
    return BarrierVerdict(margin, err, verdict, C, constants.beta, constants.K, delta, eps,
                          [float(v) for v in values], [float(e) for e in errs], failing, landis)
