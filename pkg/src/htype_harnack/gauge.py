"""Kaplan gauge, its horizontal derivatives, and the constants built from it.

With ``v, z`` the frame coordinates of a point,

    phi = d^4 = |v|^4 + 16 |z|^2,

and all horizontal derivatives below are along the orthonormal frame ``Y_j``.
Lebesgue measure is taken in frame coordinates (for unrescaled groups these are
the chart coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .exceptions import DomainError, NumericalConsistencyError, SingularityError
from .group import HTypeGroupSpec, compose, inverse, j_maps

#: d(p o q) <= 2^{1/4} (d(p) + d(q)) for every prototype H-type gauge.
K_UPPER_BOUND = 2.0**0.25

_CHUNK = 1 << 16
DEFAULT_BUDGET = 2_000_000


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int = 0
    flagged: bool = False

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "stderr", float(self.stderr))
        object.__setattr__(self, "flagged", bool(self.flagged))

    @property
    def rel_err(self) -> float:
        return self.stderr / abs(self.value) if self.value else math.inf


@dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


@dataclass(frozen=True)
class GaugeConstants:
    beta: float
    beta_stderr: float
    K: float
    ball_volume: float
    ball_volume_stderr: float
    seed: int = 0
    budget: int = 0

    def __post_init__(self):
        for name in ("beta", "beta_stderr", "K", "ball_volume", "ball_volume_stderr"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.beta > 0 and self.K >= 1 and self.ball_volume > 0):
            raise DomainError(f"invalid gauge constants {self}")

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "beta_stderr": self.beta_stderr,
            "K": self.K,
            "ball_volume": self.ball_volume,
            "ball_volume_stderr": self.ball_volume_stderr,
            "seed": self.seed,
            "budget": self.budget,
        }


# ------------------------------------------------------------ closed forms


def _vz(spec: HTypeGroupSpec, p):
    y = spec.to_frame(p)
    if y.shape[-1] != spec.N:
        raise DomainError(f"points must have {spec.N} coordinates")
    return y[..., : spec.m], y[..., spec.m :]


def _nonzero(d):
    if np.any(np.asarray(d) == 0):
        raise SingularityError("gauge derivative requested at the origin")


def phi(spec: HTypeGroupSpec, p):
    v, z = _vz(spec, p)
    return np.sum(v * v, axis=-1) ** 2 + 16.0 * np.sum(z * z, axis=-1)


def gauge_norm(spec: HTypeGroupSpec, p):
    return phi(spec, p) ** 0.25


def quasi_distance(spec: HTypeGroupSpec, p, q):
    """``d(q^{-1} o p)``; symmetric in its arguments."""
    return gauge_norm(spec, compose(spec, inverse(spec, q), p))


def horizontal_gradient_phi(spec: HTypeGroupSpec, p):
    v, z = _vz(spec, p)
    jz_v = np.einsum("...k,...ki->...i", z, j_maps(spec, v))
    return 4.0 * (np.sum(v * v, axis=-1)[..., None] * v + 4.0 * jz_v)


def horizontal_gradient_d(spec: HTypeGroupSpec, p):
    d = gauge_norm(spec, p)
    _nonzero(d)
    return horizontal_gradient_phi(spec, p) / (4.0 * d[..., None] ** 3)


def _skew_center_matrix(spec, z):
    # S_ij = <z, [e_i, e_j]> = sum_k z_k F[k]_{ji}
    return np.einsum("...k,kji->...ij", z, spec.frame_B)


def horizontal_hessian_phi(spec: HTypeGroupSpec, p):
    """Full matrix ``Y_i Y_j phi`` (apply ``Y_j`` first); its skew part is ``16 <z, [e_i, e_j]>``."""
    v, z = _vz(spec, p)
    m = spec.m
    vv = np.sum(v * v, axis=-1)[..., None, None]
    J = j_maps(spec, v)
    H = 4.0 * vv * np.eye(m)
    H = H + 8.0 * v[..., :, None] * v[..., None, :]
    H = H + 16.0 * _skew_center_matrix(spec, z)
    H = H + 8.0 * np.einsum("...ki,...kj->...ij", J, J)
    return H


def horizontal_hessian_d(spec: HTypeGroupSpec, p):
    d = gauge_norm(spec, p)
    _nonzero(d)
    g = horizontal_gradient_d(spec, p)
    d = d[..., None, None]
    return -3.0 / d * g[..., :, None] * g[..., None, :] + horizontal_hessian_phi(spec, p) / (4.0 * d**3)


def euclidean_gradient_d(spec: HTypeGroupSpec, p):
    """Coordinate gradient of ``d`` in frame coordinates."""
    v, z = _vz(spec, p)
    d = gauge_norm(spec, p)
    _nonzero(d)
    grad_phi = np.concatenate([4.0 * np.sum(v * v, axis=-1)[..., None] * v, 32.0 * z], axis=-1)
    return grad_phi / (4.0 * d[..., None] ** 3)


def psi0(spec: HTypeGroupSpec, p):
    """Mean-value kernel ``|grad_H d|^2 / |grad d|``."""
    gh = horizontal_gradient_d(spec, p)
    ge = np.linalg.norm(euclidean_gradient_d(spec, p), axis=-1)
    if np.any(ge == 0):
        raise SingularityError("full gradient of the gauge vanishes")
    return np.sum(gh * gh, axis=-1) / ge


def radial_hessian(spec: HTypeGroupSpec, p, dG, d2G):
    """``Y_i Y_j (G o d)`` given ``G'(d(p))`` and ``G''(d(p))``."""
    g = horizontal_gradient_d(spec, p)
    H = horizontal_hessian_d(spec, p)
    dG = np.asarray(dG)[..., None, None]
    d2G = np.asarray(d2G)[..., None, None]
    return d2G * g[..., :, None] * g[..., None, :] + dG * H


def fundamental_solution_residual(spec: HTypeGroupSpec, p):
    """Sub-Laplacian of ``d^{2-Q}`` from the closed forms; vanishes away from the origin."""
    Q = spec.Q
    d = gauge_norm(spec, p)
    _nonzero(d)
    H = radial_hessian(spec, p, (2 - Q) * d ** (1 - Q), (2 - Q) * (1 - Q) * d ** (-Q))
    return np.trace(H, axis1=-2, axis2=-1)


# ------------------------------------------------------------- sampling


def _box_half_widths(spec: HTypeGroupSpec, R: float):
    return np.concatenate([np.full(spec.m, R), np.full(spec.n, R * R / 4.0)])


def _box_samples(spec, R, size, rng):
    """Uniform samples (frame coordinates) in the box that exactly contains ``B_R(0)``."""
    hw = _box_half_widths(spec, R)
    return rng.uniform(-1.0, 1.0, size=(size, spec.N)) * hw


def _frame_gauge(spec, y):
    v, z = y[..., : spec.m], y[..., spec.m :]
    return (np.sum(v * v, axis=-1) ** 2 + 16.0 * np.sum(z * z, axis=-1)) ** 0.25


def _box_mc(spec, R, budget, rng, integrand):
    """Integral over ``B_R(0)`` of ``integrand(y, d)`` from ``budget`` box samples."""
    hw = _box_half_widths(spec, R)
    vol = float(np.prod(2 * hw))
    s1 = s2 = 0.0
    done = 0
    while done < budget:
        k = min(_CHUNK, budget - done)
        y = _box_samples(spec, R, k, rng)
        d = _frame_gauge(spec, y)
        inside = d < R
        vals = np.zeros(k)
        if np.any(inside):
            vals[inside] = integrand(y[inside], d[inside])
        s1 += vals.sum()
        s2 += (vals * vals).sum()
        done += k
    mean = s1 / budget
    var = max(s2 / budget - mean * mean, 0.0)
    return vol * mean, vol * math.sqrt(var / budget)


def sample_ball(spec: HTypeGroupSpec, size: int, rng, R: float = 1.0):
    """``size`` uniform points of ``B_R(0)`` in frame coordinates (rejection from the box)."""
    out = []
    have = 0
    while have < size:
        y = _box_samples(spec, R, max(2 * (size - have), 64), rng)
        y = y[_frame_gauge(spec, y) < R]
        out.append(y)
        have += len(y)
    return np.concatenate(out)[:size]


def sample_unit_sphere(spec: HTypeGroupSpec, size: int, rng):
    """Points with ``d = 1`` distributed by the cone measure (frame coordinates).

    A uniform point of ``B_1`` is ``delta_r(omega)`` with ``r`` of density
    ``Q r^{Q-1}`` independent of ``omega``, so ``dxi = Q |B_1| r^{Q-1} dr dsigma_c(omega)``.
    """
    y = sample_ball(spec, size, rng)
    d = _frame_gauge(spec, y)
    while np.any(d < 1e-12):
        bad = d < 1e-12
        y[bad] = sample_ball(spec, int(bad.sum()), rng)
        d = _frame_gauge(spec, y)
    y = y.copy()
    y[:, : spec.m] /= d[:, None]
    y[:, spec.m :] /= (d * d)[:, None]
    return y


def _sphere_area(k: int) -> float:
    """Area of the unit sphere S^{k-1} in R^k (2 for k = 1)."""
    return 2.0 * math.pi ** (k / 2) / math.gamma(k / 2)


def _uniform_sphere(rng, size, k):
    g = rng.standard_normal((size, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------- volumes, beta


def ball_volume(spec: HTypeGroupSpec, budget: int = DEFAULT_BUDGET, seed: int = 0, method: str = "radial", R: float = 1.0) -> Estimate:
    """Lebesgue measure of ``B_R(0)``.

    ``rejection`` counts box samples; ``radial`` integrates the exact volume of
    the center slab ``{16|t|^2 < R^4 - |x|^4}`` over ``|x| < R``.
    """
    if budget <= 0:
        raise DomainError("quadrature budget must be positive")
    proto = spec.prototype()
    m, n = proto.m, proto.n
    if method == "rejection":
        rng = np.random.default_rng(seed)
        val, err = _box_mc(proto, R, budget, rng, lambda y, d: np.ones(len(y)))
        return Estimate(val, err, budget, flagged=err > 0.01 * val)
    if method == "radial":
        slab_unit = math.pi ** (n / 2) / math.gamma(n / 2 + 1)

        def layer(r):
            return _sphere_area(m) * r ** (m - 1) * slab_unit * (math.sqrt(max(R**4 - r**4, 0.0)) / 4.0) ** n

        limit = max(50, min(budget, 10_000))
        val, err = integrate.quad(layer, 0.0, R, limit=limit, epsabs=0.0, epsrel=1e-12)
        return Estimate(val, err, limit, flagged=err > 0.01 * val)
    raise DomainError(f"unknown ball volume method {method!r}")


def gauge_power_integral(spec: HTypeGroupSpec, alpha: float, budget: int = DEFAULT_BUDGET, seed: int = 0) -> Estimate:
    """``int_{B_1} d^{-alpha}`` for ``alpha < Q`` by dilation shells.

    The shells ``B_{2^-k} minus B_{2^-k-1}`` are dilates of the base shell, so the
    integral is the base-shell integral times ``1 / (1 - 2^{alpha - Q})``; the
    base shell integrand is bounded and sampled from its bounding box.
    """
    proto = spec.prototype()
    Q = proto.Q
    if not alpha < Q:
        raise DomainError("d^{-alpha} is integrable near the origin only for alpha < Q")
    rng = np.random.default_rng(seed)

    def shell(y, d):
        return np.where(d >= 0.5, d ** (-alpha), 0.0)

    val, err = _box_mc(proto, 1.0, budget, rng, shell)
    factor = 1.0 / (1.0 - 2.0 ** (alpha - Q))
    return Estimate(val * factor, err * factor, budget, flagged=err > 0.01 * val)


def horizontal_energy(spec: HTypeGroupSpec, budget: int = DEFAULT_BUDGET, seed: int = 0, R: float = 1.0) -> Estimate:
    """``int_{B_R} |grad_H d|^2 dx`` by box Monte Carlo."""
    proto = spec.prototype()
    rng = np.random.default_rng(seed)

    def energy(y, d):
        v = y[:, : proto.m]
        return np.sum(v * v, axis=-1) / (d * d)

    val, err = _box_mc(proto, R, budget, rng, energy)
    return Estimate(val, err, budget)


def surface_integral_psi0(spec: HTypeGroupSpec, R: float = 1.0, nodes: int = 64, angles: int = 64, seed: int = 0) -> Estimate:
    """``int_{dB_R} psi0 dsigma`` on the explicit parametrization of the level set.

    ``dB_R = {(r w, rho(r) th)}``, ``rho = (R^4 - r^4)^{1/2} / 4``; with
    ``r = R (1 - s^2)`` the area element is smooth in ``s``.  Gauss-Legendre in
    ``s``, Monte Carlo over the sphere directions ``w, th``.
    """
    proto = spec.prototype()
    m, n = proto.m, proto.n
    rng = np.random.default_rng(seed)

    def rule(k):
        s, w = np.polynomial.legendre.leggauss(k)
        s = 0.5 * (s + 1.0)
        w = 0.5 * w
        u = s * s
        r = R * (1.0 - u)
        g = 4.0 - 6.0 * u + 4.0 * u * u - u**3  # (1 - (1-u)^4) / u
        diff = R**4 * u * g  # R^4 - r^4
        rho = np.sqrt(diff) / 4.0
        jac = r ** (m - 1) * rho ** (n - 1) * np.sqrt(4.0 * diff + r**6) / (R * np.sqrt(g))
        means = np.empty(k)
        sems = np.empty(k)
        for i in range(k):
            om = _uniform_sphere(rng, angles, m)
            th = _uniform_sphere(rng, angles, n) if n > 1 else rng.choice([-1.0, 1.0], size=(angles, 1))
            y = np.concatenate([r[i] * om, rho[i] * th], axis=1)
            vals = psi0(proto, y)
            means[i] = vals.mean()
            sems[i] = vals.std(ddof=1) / math.sqrt(angles)
        c = _sphere_area(m) * _sphere_area(n)
        return c * np.sum(w * jac * means), c * math.sqrt(np.sum((w * jac * sems) ** 2))

    fine, mc_err = rule(nodes)
    coarse, _ = rule(max(nodes // 2, 4))
    return Estimate(fine, math.hypot(mc_err, abs(fine - coarse)), nodes * angles)


@dataclass(frozen=True)
class BetaEstimate:
    beta: float
    stderr: float
    beta_surface: float
    surface_stderr: float
    R: float

    def __post_init__(self):
        for name in ("beta", "stderr", "beta_surface", "surface_stderr", "R"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def relative_disagreement(self) -> float:
        return abs(self.beta - self.beta_surface) / self.beta


def mean_value_beta(spec: HTypeGroupSpec, budget: int = DEFAULT_BUDGET, seed: int = 0, R: float = 1.0, check: bool = True) -> BetaEstimate:
    """Normalization ``beta`` of the surface mean-value formula on ``dB_R``.

    Coarea turns the surface integral into ``d/dR int_{B_R} |grad_H d|^2``, which
    is ``Q R^{Q-1} I_1`` by homogeneity; hence ``beta = R^Q / (Q I_R)``.  The
    direct level-set quadrature is computed as a cross-check.
    """
    Q = spec.Q
    energy = horizontal_energy(spec, budget, seed, R)
    beta = R**Q / (Q * energy.value)
    beta_err = beta * energy.rel_err
    surf = surface_integral_psi0(spec, R=R, seed=seed + 1)
    beta_s = R ** (Q - 1) / surf.value
    est = BetaEstimate(beta, beta_err, beta_s, beta_s * surf.rel_err, R)
    if check and est.relative_disagreement > 0.05:
        raise NumericalConsistencyError(
            f"beta estimators disagree: coarea {beta:.6g} vs surface {beta_s:.6g}"
        )
    return est


# ------------------------------------------------------------------- K


def _triangle_ratio(spec, a, b):
    num = _frame_gauge(spec, compose(spec, a, b))
    den = _frame_gauge(spec, a) + _frame_gauge(spec, b)
    return num / den


def estimate_K(spec: HTypeGroupSpec, samples: int = 20_000, seed: int = 0, safety: float = 1.05, polish: int = 8, return_sup: bool = False):
    """Quasi-triangle constant: ``safety * sup d(p o q) / (d(p) + d(q))``, floored at 1.

    The sup is taken over random pairs of gauge-sphere points at log-uniform
    relative scale and then polished locally from the best pairs.
    """
    if samples < 10_000:
        raise DomainError("estimate_K needs at least 1e4 samples")
    proto = spec.prototype()
    rng = np.random.default_rng(seed)
    a = sample_unit_sphere(proto, samples, rng)
    b = sample_unit_sphere(proto, samples, rng)
    scale = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), samples))
    from .group import dilate

    b = dilate(proto, scale, b)
    ratio = _triangle_ratio(proto, a, b)
    best = float(ratio.max())
    N = proto.N

    def neg(w):
        p, q = w[:N], w[N:]
        den = _frame_gauge(proto, p) + _frame_gauge(proto, q)
        if den < 1e-12:
            return 0.0
        return -float(_frame_gauge(proto, compose(proto, p, q)) / den)

    for idx in np.argsort(ratio)[::-1][:polish]:
        res = optimize.minimize(neg, np.concatenate([a[idx], b[idx]]), method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = max(best, -res.fun)
    K = float(max(1.0, safety * best))
    return (K, best) if return_sup else K


def gauge_constants(spec: HTypeGroupSpec, budget: int = DEFAULT_BUDGET, seed: int = 0, K_samples: int = 20_000) -> GaugeConstants:
    vol = ball_volume(spec, budget=budget, seed=seed, method="radial")
    beta = mean_value_beta(spec, budget=budget, seed=seed)
    K = estimate_K(spec, samples=K_samples, seed=seed)
    return GaugeConstants(beta.beta, beta.stderr, K, vol.value, vol.stderr, seed=seed, budget=budget)


def ball_volume_closed_form(spec: HTypeGroupSpec) -> float:
    """``|B_1|`` via the Beta-function evaluation of the radial slab integral."""
    proto = spec.prototype()
    m, n = proto.m, proto.n
    slab = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * 4.0**-n
    radial = 0.25 * special.beta(m / 4.0, n / 2.0 + 1.0)
    return _sphere_area(m) * slab * radial
