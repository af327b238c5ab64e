"""Finite-difference Dirichlet problems for ``L_A`` on coordinate boxes.

In exponential coordinates the frame fields are ``Y_j = sum_c E_jc(p) d_c``, so

    L_A = sum_cd (E^T A E)_cd d_c d_d + sum_d b_d d_d,
    b_{m+k} = 1/2 sum_ij a_ij F[k]_ji,

with ``F`` the frame structure matrices.  ``b`` vanishes for symmetric ``A``
but is assembled anyway.  Second derivatives use centered differences, mixed
ones the 4-point cross stencil; the resulting matrix is not an M-matrix, so
undershoots are measured and reported rather than assumed away.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .barrier import critical_density_epsilon, lower_bound_gamma, theoretical_C
from .exceptions import DomainError, SolverError, StructureError
from .gauge import BallSpec, gauge_constants, gauge_norm
from .group import HTypeGroupSpec, compose, dilate, inverse
from .operator import (
    CoefficientField,
    EllipticityBounds,
    delta_from_ratio,
    landis_delta_field,
    pullback_field,
    random_smooth_field,
)

MIN_RESOLUTION = 8
DIRECT_LIMIT = 20_000
DIRECT_TOL = 1e-10
ITERATIVE_TOL = 1e-8
UNDERSHOOT_TOL = 1e-8
# level-set membership is decided up to roundoff of the solve
THRESHOLD_RTOL = 1e-12

CSV_COLUMNS = ("case_id", "R", "sup", "inf", "quotient", "fraction_ge_1", "inf_half", "residual_max")


# ------------------------------------------------------------------ grid


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform tensor grid on the box ``center +- half_widths``, boundary nodes included."""

    center: np.ndarray
    half_widths: np.ndarray
    resolution: tuple

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        hw = np.asarray(self.half_widths, dtype=float)
        res = tuple(int(r) for r in np.broadcast_to(self.resolution, hw.shape))
        if c.shape != hw.shape or c.ndim != 1:
            raise StructureError("center and half_widths must be vectors of equal length")
        if not np.all(np.isfinite(hw)) or np.any(hw <= 0):
            raise StructureError(f"degenerate box half-widths {hw}")
        if min(res) < MIN_RESOLUTION:
            raise StructureError(f"resolution must be >= {MIN_RESOLUTION} per axis, got {res}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def for_ball(cls, spec: HTypeGroupSpec, x0, radius: float, resolution=17, pad: float = 1.0) -> "GridSpec":
        """Smallest box containing ``B_{pad * radius}(x0)``.

        For ``q`` in ``B_rho(0)``: ``|x_i| <= rho |row_i(D)|`` and the center part of
        ``x0 o q`` moves by at most ``rho^2/4 + rho/2 |D^T B[k] x0|``.  Center widths
        therefore scale as the square of horizontal widths.
        """
        if not radius > 0 or not pad >= 1:
            raise DomainError("need radius > 0 and pad >= 1")
        x0 = spec.origin() if x0 is None else np.asarray(x0, dtype=float)
        rho = pad * radius
        xc, _ = spec.split(x0)
        hx = rho * np.linalg.norm(spec.D, axis=1)
        shear = np.linalg.norm(np.einsum("ai,kab,b->ki", spec.D, spec.B, xc), axis=1)
        ht = rho * rho / 4.0 + 0.5 * rho * shear
        return cls(x0, np.concatenate([hx, ht]), resolution)

    @property
    def N(self) -> int:
        return len(self.half_widths)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacing(self) -> np.ndarray:
        return 2.0 * self.half_widths / (np.asarray(self.resolution) - 1)

    def axes(self):
        return [np.linspace(c - w, c + w, r) for c, w, r in zip(self.center, self.half_widths, self.resolution)]

    def nodes(self) -> np.ndarray:
        """``(size, N)`` node coordinates in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def interior_mask(self) -> np.ndarray:
        idx = np.indices(self.resolution).reshape(self.N, -1)
        hi = np.asarray(self.resolution)[:, None] - 1
        return np.all((idx > 0) & (idx < hi), axis=0)

    def refined(self) -> "GridSpec":
        """Same box, spacing halved exactly."""
        return GridSpec(self.center, self.half_widths, tuple(2 * r - 1 for r in self.resolution))

    def as_dict(self) -> dict:
        return {"center": self.center.tolist(), "half_widths": self.half_widths.tolist(),
                "resolution": list(self.resolution)}


# -------------------------------------------------------------- operator


def _frame_rows(spec: HTypeGroupSpec, p):
    """``E[..., j, :]``: coordinates of ``Y_j`` at ``p``."""
    x, _ = spec.split(p)
    D = spec.D
    E = np.empty(x.shape[:-1] + (spec.m, spec.N))
    E[..., : spec.m] = D.T
    # t-part of Y_j: 1/2 sum_i D_ij (B[k] x)_i
    E[..., spec.m :] = 0.5 * np.einsum("ij,kia,...a->...jk", D, spec.B, x)
    return E


def expand_LA_coordinates(fld: CoefficientField, spec: HTypeGroupSpec, p):
    """Coordinate form of ``L_A`` at ``p``: second-order matrix ``E^T A E`` and first-order vector."""
    p = np.asarray(p, dtype=float)
    A = fld.evaluate(p)
    E = _frame_rows(spec, p)
    M = np.einsum("...ic,...ij,...jd->...cd", E, A, E)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    b = np.zeros(p.shape[:-1] + (spec.N,))
    b[..., spec.m :] = 0.5 * np.einsum("...ij,kji->...k", A, spec.frame_B)
    return M, b


@dataclass
class BoundaryData:
    """Dirichlet data ``func`` on chart points plus a serializable descriptor."""

    func: Callable[[np.ndarray], np.ndarray]
    descriptor: dict

    def __call__(self, p):
        return np.asarray(self.func(np.asarray(p, dtype=float)), dtype=float)


def boundary_preset(name: str, spec: HTypeGroupSpec, **params) -> BoundaryData:
    """Named boundary data: ``constant``, ``affine``, ``sine``, ``fundamental``, ``random``."""
    if name == "constant":
        c = float(params.get("value", 1.0))
        return BoundaryData(lambda p: np.full(p.shape[:-1], c), {"name": name, "value": c})
    if name == "affine":
        w = np.zeros(spec.N)
        w[: spec.m] = np.asarray(params.get("weights", np.eye(spec.m)[0]), dtype=float)
        c = float(params.get("offset", 0.0))
        return BoundaryData(lambda p: p @ w + c, {"name": name, "weights": w[: spec.m].tolist(), "offset": c})
    if name == "sine":
        a = float(params.get("amplitude", 0.5))
        return BoundaryData(lambda p: 1.0 + a * np.sin(p[..., 0]), {"name": name, "amplitude": a})
    if name == "fundamental":
        pole = np.asarray(params.get("pole", spec.origin()), dtype=float)
        Q = spec.Q
        return BoundaryData(lambda p: gauge_norm(spec, compose(spec, inverse(spec, pole), p)) ** (2 - Q),
                            {"name": name, "pole": pole.tolist()})
    if name == "random":
        seed = int(params.get("seed", 0))
        rng = np.random.default_rng(seed)
        scale = float(np.exp(rng.uniform(np.log(0.5), np.log(4.0))))
        amp = rng.uniform(0.0, 0.9)
        w = rng.normal(scale=1.5, size=spec.N)
        ph = rng.uniform(0, 2 * np.pi)
        return BoundaryData(lambda p: scale * (1.0 + amp * np.sin(p @ w + ph)),
                            {"name": name, "seed": seed, "scale": scale, "amplitude": amp})
    raise StructureError(f"unknown boundary preset {name!r}")


@dataclass
class LinearSystem:
    grid: GridSpec
    spec: HTypeGroupSpec
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray
    boundary: dict = field(default_factory=dict)


def assemble_system(grid: GridSpec, fld: CoefficientField, spec: HTypeGroupSpec, boundary,
                    source=None) -> LinearSystem:
    """Sparse system for ``L_A u = source`` inside the box, ``u = boundary`` on its faces."""
    if grid.N != spec.N:
        raise StructureError(f"grid has {grid.N} axes, group has dimension {spec.N}")
    if not isinstance(boundary, BoundaryData):
        boundary = BoundaryData(boundary, {"name": "custom"})
    h = grid.spacing
    if np.any(h <= 0) or not np.all(np.isfinite(1.0 / h**2)):
        raise StructureError(f"degenerate grid spacing {h}")
    shape = grid.shape
    nodes = grid.nodes()
    interior = grid.interior_mask()
    rows_int = np.flatnonzero(interior)
    M, b = expand_LA_coordinates(fld, spec, nodes[rows_int])
    multi = np.array(np.unravel_index(rows_int, shape))
    N = grid.N
    # rows are scaled by h_1^2: keeps them O(1) and makes dilated systems identical
    M = M * h[0] ** 2
    b = b * h[0] ** 2

    rows, cols, vals = [], [], []

    def put(offset, coef):
        nb = np.ravel_multi_index(multi + np.asarray(offset)[:, None], shape)
        rows.append(rows_int)
        cols.append(nb)
        vals.append(coef)

    put(np.zeros(N, int), -2.0 * np.sum(np.diagonal(M, axis1=1, axis2=2) / h**2, axis=1))
    for c in range(N):
        e = np.eye(N, dtype=int)[c]
        put(e, M[:, c, c] / h[c] ** 2 + b[:, c] / (2 * h[c]))
        put(-e, M[:, c, c] / h[c] ** 2 - b[:, c] / (2 * h[c]))
    for c, d in itertools.combinations(range(N), 2):
        coef = M[:, c, d] / (2.0 * h[c] * h[d])
        if not np.any(coef):
            continue
        for sc, sd in itertools.product((1, -1), repeat=2):
            off = np.zeros(N, int)
            off[c], off[d] = sc, sd
            put(off, sc * sd * coef)

    rows_bd = np.flatnonzero(~interior)
    rows.append(rows_bd)
    cols.append(rows_bd)
    vals.append(np.ones(len(rows_bd)))
    K = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(grid.size, grid.size))
    rhs = np.zeros(grid.size)
    rhs[rows_bd] = boundary(nodes[rows_bd])
    if source is not None:
        rhs[rows_int] = h[0] ** 2 * np.broadcast_to(np.asarray(source(nodes[rows_int]), dtype=float), len(rows_int))
    if not np.all(np.isfinite(rhs)):
        raise DomainError("boundary data or source not finite on the grid")
    return LinearSystem(grid, spec, K, rhs, interior, boundary.descriptor)


# ----------------------------------------------------------------- solve


@dataclass
class DiscreteSolution:
    grid: GridSpec
    spec: HTypeGroupSpec
    values: np.ndarray
    residual_max: float
    boundary: dict
    solver: str = "direct"
    iterations: int = 0

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def min_value(self) -> float:
        return float(self.values.min())


def _interior_residual(system: LinearSystem, u):
    """Normwise backward error ``max |r_i| / (sum_j |K_ij| |u_j| + |f_i|)`` over interior rows."""
    r = system.matrix @ u - system.rhs
    scale = abs(system.matrix) @ np.abs(u) + np.abs(system.rhs)
    inner = system.interior
    if not np.any(inner):
        return 0.0
    denom = np.maximum(scale[inner], np.finfo(float).tiny)
    return float(np.max(np.abs(r[inner]) / denom))


def solve_dirichlet(system: LinearSystem, method: str = "auto", tol: float | None = None,
                    maxiter: int = 40) -> DiscreteSolution:
    """Sparse LU up to ``DIRECT_LIMIT`` unknowns, ILU-preconditioned restarted GMRES beyond."""
    n = system.matrix.shape[0]
    if method == "auto":
        method = "direct" if n <= DIRECT_LIMIT else "iterative"
    iterations = 0
    K = system.matrix.tocsc()
    if method == "direct":
        u = spla.splu(K).solve(system.rhs)
        tol = DIRECT_TOL if tol is None else tol
    elif method == "iterative":
        tol = ITERATIVE_TOL if tol is None else tol
        # no pivoting: rows where the center direction degenerates would otherwise break ILU
        ilu = spla.spilu(K, drop_tol=1e-3, fill_factor=5, diag_pivot_thresh=0.0)
        pre = spla.LinearOperator(K.shape, ilu.solve)
        trace = []
        u, info = spla.gmres(K, system.rhs, M=pre, rtol=1e-12, atol=0.0, restart=50, maxiter=maxiter,
                             callback=trace.append, callback_type="pr_norm")
        iterations = len(trace)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})", trace)
    else:
        raise StructureError(f"unknown solver method {method!r}")
    if not np.all(np.isfinite(u)):
        raise SolverError("solution contains non-finite values")
    res = _interior_residual(system, u)
    if res > tol:
        raise SolverError(f"residual {res:.3g} above tolerance {tol:.1g}", [res])
    return DiscreteSolution(system.grid, system.spec, u.reshape(system.grid.shape), res,
                            system.boundary, method, iterations)


def solve(grid: GridSpec, fld: CoefficientField, spec: HTypeGroupSpec, boundary, **kw) -> DiscreteSolution:
    return solve_dirichlet(assemble_system(grid, fld, spec, boundary), **kw)


def discrete_operator_error(fld: CoefficientField, spec: HTypeGroupSpec, grid: GridSpec, u: Callable,
                            exact: Callable) -> float:
    """Max interior error of the assembled operator applied to grid samples of ``u``."""
    system = assemble_system(grid, fld, spec, BoundaryData(u, {"name": "probe"}))
    nodes = grid.nodes()
    vals = system.matrix @ u(nodes) / grid.spacing[0] ** 2
    inner = system.interior
    return float(np.max(np.abs(vals[inner] - exact(nodes[inner]))))


# ---------------------------------------------------------- measurements


def _ball_nodes(solution: DiscreteSolution, ball: BallSpec):
    spec = solution.spec
    nodes = solution.grid.nodes()
    d = gauge_norm(spec, compose(spec, inverse(spec, ball.center), nodes))
    return d <= ball.radius * (1 + 1e-12)


@dataclass
class HarnackReport:
    R: float
    quotient: float
    inf_value: float
    sup_value: float
    nodes: int
    negative_nodes: int = 0
    min_raw: float = 0.0
    diagnosis: str = ""
    trace: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"R": self.R, "quotient": self.quotient, "inf": self.inf_value, "sup": self.sup_value,
                "nodes": self.nodes, "negative_nodes": self.negative_nodes, "min_raw": self.min_raw,
                "diagnosis": self.diagnosis, "trace": list(self.trace)}


def _clamped_ball_values(solution: DiscreteSolution, ball: BallSpec):
    mask = _ball_nodes(solution, ball)
    if not np.any(mask):
        raise DomainError(f"no grid nodes inside the ball of radius {ball.radius}")
    u = solution.flat[mask]
    raw_min = float(u.min())
    negative = int(np.sum(u < 0))
    if raw_min < -UNDERSHOOT_TOL:
        warnings.warn(f"discrete solution undershoots to {raw_min:.3g} inside the ball", RuntimeWarning)
    elif negative:
        warnings.warn(f"clamping {negative} small negative values (>= {-UNDERSHOOT_TOL:g})", RuntimeWarning)
        u = np.maximum(u, 0.0)
    return u, raw_min, negative


def harnack_quotient(solution: DiscreteSolution, ball: BallSpec) -> HarnackReport:
    """``sup / inf`` of the solution over grid nodes in ``ball``."""
    u, raw_min, negative = _clamped_ball_values(solution, ball)
    sup, inf = float(u.max()), float(u.min())
    diagnosis = ""
    if inf <= 0:
        q = math.inf
        diagnosis = (f"inf {inf:.3g} <= 0 over {len(u)} nodes: not a positive solution here"
                     if sup > 0 else "solution vanishes identically on the ball")
    else:
        q = sup / inf
    return HarnackReport(float(ball.radius), q, inf, sup, len(u), negative, raw_min, diagnosis)


@dataclass(frozen=True)
class DensityMeasurement:
    fraction: float
    inf_half: float
    nodes: int
    half_nodes: int


def critical_density_experiment(solution: DiscreteSolution, R: float, x0=None, threshold: float = 1.0,
                                half_radius_factor: float = 0.5) -> DensityMeasurement:
    """Node fraction of ``{u >= threshold}`` in ``B_R(x0)`` and ``inf u`` over ``B_{R/2}(x0)``."""
    x0 = solution.spec.origin() if x0 is None else np.asarray(x0, dtype=float)
    u, _, _ = _clamped_ball_values(solution, BallSpec(x0, R))
    half, _, _ = _clamped_ball_values(solution, BallSpec(x0, half_radius_factor * R))
    level = threshold - THRESHOLD_RTOL * max(abs(threshold), 1.0)
    return DensityMeasurement(float(np.mean(u >= level)), float(half.min()), len(u), len(half))


def harnack_refinement(fld: CoefficientField, spec: HTypeGroupSpec, boundary, R: float = 1.0, x0=None,
                       pad: float = 2.0, resolutions: Sequence[int] = (17, 33), **solve_kw) -> HarnackReport:
    """Harnack quotient on ``B_R(x0)`` over a refinement sequence of boxes around ``B_{pad R}``."""
    x0 = spec.origin() if x0 is None else np.asarray(x0, dtype=float)
    trace = []
    report = None
    for res in resolutions:
        grid = GridSpec.for_ball(spec, x0, R, res, pad=pad)
        sol = solve(grid, fld, spec, boundary, **solve_kw)
        report = harnack_quotient(sol, BallSpec(x0, R))
        trace.append({"resolution": res, "quotient": report.quotient, "inf": report.inf_value,
                      "sup": report.sup_value, "residual_max": sol.residual_max})
    report.trace = trace
    return report


# ------------------------------------------------------------ dilations


@dataclass
class DilationReport:
    R_list: list
    discrepancies: list
    resolution: int

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies) if self.discrepancies else 0.0

    def as_dict(self) -> dict:
        return {"R": list(self.R_list), "discrepancy": list(self.discrepancies), "resolution": self.resolution,
                "max_discrepancy": self.max_discrepancy}


def dilation_consistency(fld: CoefficientField, spec: HTypeGroupSpec, R_list, resolution: int = 17,
                         x0=None, boundary: BoundaryData | None = None, base_radius: float = 1.0) -> DilationReport:
    """Compare the solve at scale ``R`` with the pulled-back solve at scale 1.

    With ``u(y) = v(x0 o delta_R(y))`` and ``A~(y) = A(x0 o delta_R(y))``, the box
    for ``B_R(x0)`` is the image of the box for ``B_1(0)`` node by node whenever
    ``x0`` has no horizontal part (left translation by a horizontal point shears
    the box).  The discrepancy is ``max |v(x0 o delta_R y) - u(y)| / max |u|``.
    """
    x0 = spec.origin() if x0 is None else np.asarray(x0, dtype=float)
    if np.any(spec.split(x0)[0] != 0):
        raise DomainError("dilation comparison needs a center with zero horizontal part")
    if boundary is None:
        boundary = boundary_preset("sine", spec)
    base = GridSpec.for_ball(spec, None, base_radius, resolution)
    ref_nodes = base.nodes()
    out = []
    for R in R_list:
        if not R > 0:
            raise DomainError(f"dilation factor must be positive, got {R}")
        grid_R = GridSpec.for_ball(spec, x0, R * base_radius, resolution)
        mapped = compose(spec, x0, dilate(spec, R, ref_nodes))
        scale = np.maximum(1.0, np.abs(mapped)).max()
        if np.max(np.abs(grid_R.nodes() - mapped)) > 1e-10 * scale:
            raise StructureError("scaled grid does not match the dilated reference grid")
        v = solve(grid_R, fld, spec, boundary).flat
        pulled = BoundaryData(lambda y, R=R: boundary(compose(spec, x0, dilate(spec, R, y))), {"name": "pullback"})
        u = solve(base, pullback_field(spec, fld, x0, R), spec, pulled).flat
        out.append(float(np.max(np.abs(v - u)) / max(np.max(np.abs(u)), np.finfo(float).tiny)))
    return DilationReport([float(r) for r in R_list], out, resolution)


# ----------------------------------------------------------------- sweep


@dataclass
class SweepResult:
    rows: list
    summary: dict


def landis_compliant_field(spec: HTypeGroupSpec, rng, delta_min: float = 0.2) -> CoefficientField:
    """Random smooth field whose eigenvalue ratio alone guarantees margin ``>= delta_min``."""
    Q = spec.Q
    ratio_max = ((Q + 3) - delta_min) / (Q + 1)
    if ratio_max <= 1:
        raise DomainError(f"margin {delta_min} is not reachable on Q={Q}")
    lam = float(rng.uniform(0.5, 2.0))
    Lam = lam * float(rng.uniform(1.0, ratio_max))
    return random_smooth_field(spec.m, spec.N, EllipticityBounds(lam, Lam), rng)


def run_case(case_id, fld, spec, boundary, R, x0, resolution, pad=2.0) -> tuple[dict, DiscreteSolution]:
    """One CSV row: Harnack quotient on ``B_R(x0)`` and the density pair for the box around ``B_{2R}``."""
    grid = GridSpec.for_ball(spec, x0, R, resolution, pad=pad)
    sol = solve(grid, fld, spec, boundary)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        hq = harnack_quotient(sol, BallSpec(x0, R))
        cd = critical_density_experiment(sol, R, x0)
    row = {"case_id": case_id, "R": float(R), "sup": hq.sup_value, "inf": hq.inf_value,
           "quotient": hq.quotient, "fraction_ge_1": cd.fraction, "inf_half": cd.inf_half,
           "residual_max": sol.residual_max}
    return row, sol


def critical_density_sweep(spec: HTypeGroupSpec, cases: int = 50, seed: int = 0, resolution: int = 17,
                           R: float = 1.0, x0=None, delta_min: float = 0.2, constants=None,
                           gamma_budget: int = 200_000) -> SweepResult:
    """Random Landis-compliant fields and positive boundary data, solved around ``B_{2R}(x0)``.

    The estimate bounds the set where ``u < 1``: if ``inf_{B_{R/2}} u < 1/2`` then
    ``|{u < 1} n B_R| >= eps |B_R|``.  A case counts as a counterexample when the
    measured node fraction of ``{u < 1}`` is below ``eps`` while ``inf_half < 1/2``.
    """
    x0 = spec.origin() if x0 is None else np.asarray(x0, dtype=float)
    rng = np.random.default_rng(seed)
    if constants is None:
        constants = gauge_constants(spec, seed=seed)
    gammas = {}
    rows, flagged, eps_list, undershoots = [], [], [], 0
    for case in range(cases):
        fld = landis_compliant_field(spec, rng, delta_min)
        boundary = boundary_preset("random", spec, seed=int(rng.integers(2**31)))
        delta = min(2.0, delta_from_ratio(fld.bounds, spec.Q))
        key = round(delta, 12)
        if key not in gammas:
            gammas[key] = lower_bound_gamma(spec, delta, constants, budget=gamma_budget, seed=seed).value
        C = theoretical_C(constants.beta, constants.K, delta)
        eps = critical_density_epsilon(C, gammas[key], spec.Q, fld.bounds, delta)
        row, sol = run_case(case, fld, spec, boundary, R, x0, resolution)
        rows.append(row)
        eps_list.append(eps)
        undershoots += int(sol.min_value < -UNDERSHOOT_TOL)
        below = 1.0 - row["fraction_ge_1"]
        if row["inf_half"] < 0.5 and below < eps:
            flagged.append(case)
    summary = {
        "cases": cases,
        "counterexamples": len(flagged),
        "counterexample_ids": flagged,
        "claims_triggered": int(sum(1.0 - r["fraction_ge_1"] < e for r, e in zip(rows, eps_list))),
        "inf_half_below_c": int(sum(r["inf_half"] < 0.5 for r in rows)),
        "epsilon_min": float(min(eps_list)) if eps_list else None,
        "epsilon_max": float(max(eps_list)) if eps_list else None,
        "c": 0.5,
        "undershoot_cases": undershoots,
        "resolution": resolution,
        "seed": seed,
        "max_quotient": float(max(r["quotient"] for r in rows)) if rows else None,
    }
    return SweepResult(rows, summary)


def landis_margin_on_grid(fld: CoefficientField, spec: HTypeGroupSpec, grid: GridSpec) -> float:
    return landis_delta_field(fld, grid.nodes(), spec.Q).delta
