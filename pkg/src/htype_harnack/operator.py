"""The horizontally elliptic operator ``L_A = sum a_ij Y_i Y_j`` and the Cordes-Landis margin."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .exceptions import DomainError, StructureError
from .gauge import (
    gauge_norm,
    horizontal_gradient_d,
    horizontal_hessian_d,
    sample_ball,
)
from .group import HTypeGroupSpec, compose, dilate, exp_point, j_maps, log_point

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class EllipticityBounds:
    lam: float
    Lam: float

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise DomainError(f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")

    @property
    def ratio(self) -> float:
        return self.Lam / self.lam


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric matrix field ``A(p)`` on chart points, with declared bounds.

    ``func`` maps an ``(k, N)`` array of points to ``(k, m, m)`` matrices and must
    be a pure function of the point.
    """

    func: Callable[[np.ndarray], np.ndarray]
    bounds: EllipticityBounds
    m: int
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def evaluate(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, p.shape[-1])
        A = np.asarray(self.func(flat), dtype=float)
        if A.shape != (len(flat), self.m, self.m):
            raise StructureError(f"field returned shape {A.shape}, expected {(len(flat), self.m, self.m)}")
        return A.reshape(p.shape[:-1] + (self.m, self.m))

    def __call__(self, p):
        return self.evaluate(p)


def _eig_bounds(diags):
    diags = np.asarray(diags, dtype=float)
    return EllipticityBounds(float(diags.min()), float(diags.max()))


def identity_field(m: int) -> CoefficientField:
    eye = np.eye(m)
    return CoefficientField(lambda p: np.broadcast_to(eye, (len(p), m, m)), EllipticityBounds(1.0, 1.0), m, "identity")


def constant_field(matrix, bounds: EllipticityBounds | None = None) -> CoefficientField:
    A = np.array(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructureError("constant field needs a square matrix")
    m = A.shape[0]
    if bounds is None:
        bounds = _eig_bounds(np.linalg.eigvalsh(0.5 * (A + A.T)))
    return CoefficientField(lambda p: np.broadcast_to(A, (len(p), m, m)), bounds, m, "constant", {"matrix": A.tolist()})


def diagonal_ramp_field(start, end, axis: int = 0, lo: float = -1.0, hi: float = 1.0,
                        bounds: EllipticityBounds | None = None) -> CoefficientField:
    """``diag(start + s (end - start))`` with ``s`` the clipped position of coordinate ``axis`` in ``[lo, hi]``."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    if start.shape != end.shape or start.ndim != 1:
        raise StructureError("ramp endpoints must be equal-length vectors")
    m = len(start)

    def func(p):
        s = np.clip((p[:, axis] - lo) / (hi - lo), 0.0, 1.0)[:, None]
        diag = start + s * (end - start)
        out = np.zeros((len(p), m, m))
        idx = np.arange(m)
        out[:, idx, idx] = diag
        return out

    if bounds is None:
        bounds = _eig_bounds(np.concatenate([start, end]))
    return CoefficientField(func, bounds, m, "diagonal_ramp",
                            {"start": start.tolist(), "end": end.tolist(), "axis": axis, "lo": lo, "hi": hi})


def _rotation(m, plane, theta):
    i, j = plane
    c, s = np.cos(theta), np.sin(theta)
    R = np.broadcast_to(np.eye(m), theta.shape + (m, m)).copy()
    R[..., i, i] = c
    R[..., j, j] = c
    R[..., i, j] = -s
    R[..., j, i] = s
    return R


def rotating_field(diag, rate: float = 1.0, axis: int = 0, plane=(0, 1),
                   bounds: EllipticityBounds | None = None) -> CoefficientField:
    """``O(theta) diag O(theta)^T`` with ``theta = rate * p[axis]``, rotating in ``plane``."""
    diag = np.asarray(diag, dtype=float)
    m = len(diag)
    if m < 2:
        raise StructureError("rotating field needs m >= 2")
    D = np.diag(diag)

    def func(p):
        R = _rotation(m, plane, rate * p[:, axis])
        return R @ D @ np.swapaxes(R, -1, -2)

    if bounds is None:
        bounds = _eig_bounds(diag)
    return CoefficientField(func, bounds, m, "rotating", {"diag": diag.tolist(), "rate": rate, "axis": axis, "plane": list(plane)})


def ratio_field(m: int, lam: float, Lam: float, rate: float = 1.0) -> CoefficientField:
    """Rotating field with eigenvalues ``(lam, Lam, ..., Lam)``: the worst case for a given ratio."""
    diag = np.full(m, float(Lam))
    diag[0] = lam
    f = rotating_field(diag, rate=rate, bounds=EllipticityBounds(lam, Lam))
    return CoefficientField(f.func, f.bounds, m, "ratio", {"lambda": lam, "Lambda": Lam, "rate": rate})


def random_smooth_field(m: int, N: int, bounds: EllipticityBounds, rng) -> CoefficientField:
    """Smooth random field with eigenvalues in ``[lam, Lam]`` and a point-dependent eigenbasis."""
    lam, Lam = bounds.lam, bounds.Lam
    freq = rng.normal(scale=2.0, size=(m, N))
    phase = rng.uniform(0, 2 * np.pi, size=m)
    rot_freq = rng.normal(scale=2.0, size=(m - 1, N)) if m > 1 else np.zeros((0, N))
    rot_phase = rng.uniform(0, 2 * np.pi, size=m - 1)

    def func(p):
        eig = lam + (Lam - lam) * 0.5 * (1.0 + np.sin(p @ freq.T + phase))
        R = np.broadcast_to(np.eye(m), (len(p), m, m)).copy()
        for k in range(m - 1):
            R = R @ _rotation(m, (k, k + 1), np.pi * np.sin(p @ rot_freq[k] + rot_phase[k]))
        return R @ (eig[:, :, None] * np.swapaxes(R, -1, -2))

    return CoefficientField(func, bounds, m, "random_smooth", {"lambda": lam, "Lambda": Lam})


def pullback_field(spec: HTypeGroupSpec, fld: CoefficientField, x0, R: float) -> CoefficientField:
    """``A~(y) = A(x0 o delta_R(y))``: the coefficients seen by ``u(y) = v(x0 o delta_R(y))``."""
    x0 = np.asarray(x0, dtype=float)

    def func(p):
        return fld.evaluate(compose(spec, x0, dilate(spec, R, p)))

    return CoefficientField(func, fld.bounds, fld.m, fld.kind + ":pullback", dict(fld.params, x0=x0.tolist(), R=R))


# ----------------------------------------------------------- ellipticity


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    failures: list
    max_excess: float


def _symmetric(A, tol=SYMMETRY_TOL):
    dev = np.max(np.abs(A - np.swapaxes(A, -1, -2))) if A.size else 0.0
    if dev > tol:
        raise StructureError(f"coefficient matrix is not symmetric (deviation {dev:.3e})")


def check_ellipticity(fld: CoefficientField, points, tol: float = 1e-10) -> EllipticityReport:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise DomainError("no sample points")
    A = fld.evaluate(points)
    _symmetric(A)
    eig = np.linalg.eigvalsh(A)
    lo = fld.bounds.lam - eig[:, 0]
    hi = eig[:, -1] - fld.bounds.Lam
    excess = np.maximum(lo, hi)
    bad = np.nonzero(excess > tol)[0]
    failures = [(int(i), float(eig[i, 0]), float(eig[i, -1]), float(excess[i])) for i in bad]
    return EllipticityReport(len(failures) == 0, failures, float(max(excess.max(), 0.0)))


# ---------------------------------------------------------------- Landis


def landis_delta_pointwise(A, Q: int):
    """Largest ``delta`` with ``tr A + (Q+2-m) max_eig <= (Q+4-delta) min_eig``."""
    A = np.asarray(A, dtype=float)
    m = A.shape[-1]
    _symmetric(A)
    eig = np.linalg.eigvalsh(A)
    lo, hi = eig[..., 0], eig[..., -1]
    if np.any(lo <= 0):
        raise DomainError("Landis margin needs a positive definite matrix")
    tr = np.trace(A, axis1=-2, axis2=-1)
    return (Q + 4) - (tr + (Q + 2 - m) * hi) / lo


@dataclass(frozen=True)
class LandisReport:
    delta: float
    satisfied: bool
    worst_point: np.ndarray
    samples: int = 0


def landis_delta_field(fld: CoefficientField, points, Q: int) -> LandisReport:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise DomainError("no sample points")
    deltas = landis_delta_pointwise(fld.evaluate(points), Q)
    i = int(np.argmin(deltas))
    delta = float(deltas[i])
    return LandisReport(delta, delta > 0, points[i].copy(), len(points))


def landis_sample_points(spec: HTypeGroupSpec, count: int = 2048, seed: int = 0, R: float = 1.0, extra=None):
    """Scrambled Sobol fill of the gauge ball ``B_R(0)`` (chart coordinates), plus ``extra`` points."""
    m, n = spec.m, spec.n
    sob = qmc.Sobol(d=spec.N, scramble=True, seed=seed)
    u = sob.random(2 ** int(np.ceil(np.log2(max(count, 2)) + 1)))
    hw = np.concatenate([np.full(m, R), np.full(n, R * R / 4.0)])
    y = (2 * u - 1) * hw
    proto = spec.prototype()
    y = y[gauge_norm(proto, y) < R][:count]
    pts = spec.from_frame(y)
    if extra is not None:
        pts = np.concatenate([np.atleast_2d(np.asarray(extra, dtype=float)), pts])
    return pts


def delta_from_ratio(bounds: EllipticityBounds, Q: int) -> float:
    """Landis margin guaranteed by the eigenvalue ratio alone: ``(Q+3) - (Q+1) Lam/lam``."""
    return (Q + 3) - (Q + 1) * bounds.ratio


# ---------------------------------------------------------- closed forms


def contract(A, H):
    """``sum_ij A_ij H_ij``; kills the skew part of ``H`` when ``A`` is symmetric."""
    return np.einsum("...ij,...ij->...", A, H)


def _frame_vectors(spec, p):
    v, _ = log_point(spec, p)
    return v, j_maps(spec, v)


def apply_LA_closed_form_d(fld: CoefficientField, spec: HTypeGroupSpec, p):
    """``L_A d`` from the trace form with ``V = v(p)`` and ``J_k V = J_{Z_k} v(p)``."""
    p = np.asarray(p, dtype=float)
    A = fld.evaluate(p)
    d = gauge_norm(spec, p)
    g = horizontal_gradient_d(spec, p)
    V, JV = _frame_vectors(spec, p)
    tr = np.trace(A, axis1=-2, axis2=-1)
    first = (tr * np.sum(g * g, axis=-1) - 3.0 * np.einsum("...i,...ij,...j->...", g, A, g)) / d
    quad = np.einsum("...i,...ij,...j->...", V, A, V) + np.einsum("...ki,...ij,...kj->...", JV, A, JV)
    return first + 2.0 * quad / d**3


def apply_LA_hessian_d(fld: CoefficientField, spec: HTypeGroupSpec, p):
    """``L_A d`` by contracting ``A`` with the full horizontal Hessian of ``d``."""
    return contract(fld.evaluate(p), horizontal_hessian_d(spec, p))


def apply_LA_phi(fld: CoefficientField, spec: HTypeGroupSpec, p):
    p = np.asarray(p, dtype=float)
    A = fld.evaluate(p)
    V, JV = _frame_vectors(spec, p)
    tr = np.trace(A, axis1=-2, axis2=-1)
    vv = np.sum(V * V, axis=-1)
    return (4.0 * vv * tr + 8.0 * np.einsum("...i,...ij,...j->...", V, A, V)
            + 8.0 * np.einsum("...ki,...ij,...kj->...", JV, A, JV))


def horizontal_second_differences(u: Callable, spec: HTypeGroupSpec, p, step: float):
    """``d^2/ds dt u(p o Exp(s Y_i) o Exp(t Y_j))`` at 0 by the 4-point cross stencil."""
    p = np.asarray(p, dtype=float)
    m = spec.m
    eye = np.eye(m)
    signs = np.array([(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)])
    out = np.zeros((m, m))
    for i in range(m):
        step_i = exp_point(spec, np.outer(signs[:, 0] * step, eye[i]))
        first = compose(spec, p, step_i)
        for j in range(m):
            step_j = exp_point(spec, np.outer(signs[:, 1] * step, eye[j]))
            vals = np.asarray(u(compose(spec, first, step_j)), dtype=float)
            out[i, j] = np.dot(signs[:, 2], vals) / (4.0 * step * step)
    return out


def apply_LA_fd(fld: CoefficientField, u: Callable, spec: HTypeGroupSpec, p, step: float = 1e-4, richardson: bool = True):
    """Finite-difference ``L_A u(p)`` along exponential flows, optionally Richardson-extrapolated."""
    if not step > 1e-8:
        raise DomainError(f"finite-difference step {step} too small")
    p = np.asarray(p, dtype=float)
    H = horizontal_second_differences(u, spec, p, step)
    if richardson:
        H = (4.0 * horizontal_second_differences(u, spec, p, step / 2) - H) / 3.0
    return float(contract(fld.evaluate(p[None])[0], H))


def random_ball_points(spec: HTypeGroupSpec, count: int, rng, R: float = 1.0):
    """Uniform chart points of ``B_R(0)``."""
    return spec.from_frame(sample_ball(spec.prototype(), count, rng, R))
