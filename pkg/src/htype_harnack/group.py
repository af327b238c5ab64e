"""H-type groups in prototype (exponential) coordinates.

A group is given by ``n`` skew-symmetric ``m x m`` matrices ``B[k]`` and the law

    (x, t) o (x1, t1) = (x + x1, t + t1 + 1/2 <B x, x1>),   <B x, x1>_k = <B[k] x, x1>.

Points are stored as flat coordinate arrays ``p = (x_1..x_m, t_1..t_n)`` of
length ``N = m + n``; every function broadcasts over leading axes.

When the Jacobian frame ``X_1..X_m`` is not orthonormal for the H-type inner
product, a ``rescale`` matrix ``D`` is supplied and the orthonormal frame is
``Y_j = sum_i D[i, j] X_i``.  In the frame coordinates ``y = D^{-1} x`` the
group is again a prototype group, with structure matrices ``D^T B[k] D``
(``spec.frame_B``).  All metric quantities (gauge, J maps, brackets of frame
vectors) are taken in the frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, NumericalConsistencyError, StructureError

STRUCTURE_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HTypeGroupSpec:
    """Dimensions and structure matrices of a (possibly rescaled) prototype group.

    ``B`` has shape ``(n, m, m)``; ``rescale`` is either ``None``, a length-``m``
    vector of diagonal entries, or a full invertible ``m x m`` matrix.
    """

    m: int
    n: int
    B: np.ndarray
    rescale: np.ndarray | None = None
    name: str = ""
    _D: np.ndarray = field(init=False, repr=False)
    _Dinv: np.ndarray = field(init=False, repr=False)
    _frame_B: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise StructureError("m and n must be integers")
        m, n = int(self.m), int(self.n)
        if m <= 0 or n <= 0:
            raise StructureError(f"H-type groups need m >= 1 and n >= 1, got m={m}, n={n}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 2:
            B = B[None]
        if B.shape != (n, m, m):
            raise StructureError(f"expected {n} matrices of size {m}x{m}, got array of shape {B.shape}")
        if not np.all(np.isfinite(B)):
            raise StructureError("structure matrices must be finite")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "B", _frozen(B))

        if self.rescale is None:
            D = np.eye(m)
        else:
            D = np.asarray(self.rescale, dtype=float)
            if D.ndim == 1:
                if D.shape != (m,):
                    raise StructureError(f"rescale diagonal must have length {m}, got {D.shape}")
                if np.any(D <= 0):
                    raise StructureError("rescale diagonal entries must be positive")
                D = np.diag(D)
            if D.shape != (m, m):
                raise StructureError(f"rescale must be {m}x{m}, got {D.shape}")
            if abs(np.linalg.det(D)) < 1e-14:
                raise StructureError("rescale matrix is singular")
            object.__setattr__(self, "rescale", _frozen(D))
        object.__setattr__(self, "_D", _frozen(D))
        object.__setattr__(self, "_Dinv", _frozen(np.linalg.inv(D)))
        object.__setattr__(self, "_frame_B", _frozen(np.einsum("ai,kab,bj->kij", D, B, D)))

    @property
    def Q(self) -> int:
        """Homogeneous dimension ``m + 2n``."""
        return self.m + 2 * self.n

    @property
    def N(self) -> int:
        """Topological dimension ``m + n``."""
        return self.m + self.n

    @property
    def D(self) -> np.ndarray:
        return self._D

    @property
    def frame_B(self) -> np.ndarray:
        return self._frame_B

    @property
    def is_rescaled(self) -> bool:
        return self.rescale is not None

    def prototype(self) -> "HTypeGroupSpec":
        """The isomorphic prototype group in frame coordinates."""
        if not self.is_rescaled:
            return self
        return HTypeGroupSpec(self.m, self.n, self.frame_B, name=f"{self.name}:frame" if self.name else "")

    def to_frame(self, p):
        """Chart coordinates ``(x, t)`` to frame coordinates ``(D^{-1} x, t)``."""
        p = np.asarray(p, dtype=float)
        if not self.is_rescaled:
            return p
        out = p.copy()
        out[..., : self.m] = p[..., : self.m] @ self._Dinv.T
        return out

    def from_frame(self, y):
        y = np.asarray(y, dtype=float)
        if not self.is_rescaled:
            return y
        out = y.copy()
        out[..., : self.m] = y[..., : self.m] @ self._D.T
        return out

    def split(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.N:
            raise StructureError(f"points must have {self.N} coordinates, got {p.shape[-1]}")
        return p[..., : self.m], p[..., self.m :]

    def origin(self) -> np.ndarray:
        return np.zeros(self.N)


@dataclass(frozen=True)
class GroupPoint:
    """A single point ``(x, t)``; ``np.asarray(point)`` gives its coordinates."""

    x: tuple
    t: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))
        object.__setattr__(self, "t", tuple(float(v) for v in np.atleast_1d(self.t)))

    @classmethod
    def from_coords(cls, spec: HTypeGroupSpec, p) -> "GroupPoint":
        x, t = spec.split(p)
        return cls(tuple(x), tuple(t))

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.x + self.t)

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    magnitude: float

    def __str__(self):
        return f"{self.kind}{list(self.index)}: max deviation {self.magnitude:.3e}"


def _center_pairing(B, a, b):
    """``<B[k] a, b>`` for every k, broadcasting over leading axes of a and b."""
    return np.einsum("kij,...j,...i->...k", B, a, b)


def compose(spec: HTypeGroupSpec, p, q) -> np.ndarray:
    x, t = spec.split(p)
    x1, t1 = spec.split(q)
    x, x1 = np.broadcast_arrays(x, x1)
    # antisymmetrized so that p^{-1} o p has an exactly zero center
    pairing = 0.5 * (_center_pairing(spec.B, x, x1) - _center_pairing(spec.B, x1, x))
    center = t + t1 + 0.5 * pairing
    return np.concatenate([x + x1, center], axis=-1)


def inverse(spec: HTypeGroupSpec, p) -> np.ndarray:
    spec.split(p)
    return -np.asarray(p, dtype=float)


def dilate(spec: HTypeGroupSpec, lam, p) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("dilation factor must be positive")
    x, t = spec.split(p)
    lam = lam[..., None]
    return np.concatenate([lam * x, lam**2 * t], axis=-1)


def exp_point(spec: HTypeGroupSpec, v, z=None) -> np.ndarray:
    """``Exp(sum v_j Y_j + sum z_k Z_k)`` in chart coordinates (``v`` in the orthonormal frame)."""
    v = np.asarray(v, dtype=float)
    x = v @ spec.D.T
    if z is None:
        z = np.zeros(v.shape[:-1] + (spec.n,))
    return np.concatenate([x, np.asarray(z, dtype=float)], axis=-1)


def log_point(spec: HTypeGroupSpec, p):
    """Inverse of :func:`exp_point`: returns ``(v, z)`` in the orthonormal frame."""
    y = spec.to_frame(p)
    return y[..., : spec.m], y[..., spec.m :]


def bracket(spec: HTypeGroupSpec, v1, v2) -> np.ndarray:
    """Center part of ``[v1, v2]`` for horizontal frame vectors.

    Convention: ``bracket(v1, v2)_k = <frame_B[k] v1, v2>``, which is the one making
    ``Exp(v1) o Exp(v2) = Exp(v1 + v2 + 1/2 [v1, v2])`` hold for the group law.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    v1, v2 = np.broadcast_arrays(v1, v2)
    # antisymmetrized so that bracket(v, v) is exactly zero
    F = spec.frame_B
    return 0.5 * (_center_pairing(F, v1, v2) - _center_pairing(F, v2, v1))


def j_maps(spec: HTypeGroupSpec, v) -> np.ndarray:
    """``J_{Z_k}(v)`` for every center basis vector; shape ``(..., n, m)``."""
    return np.einsum("kij,...j->...ki", spec.frame_B, np.asarray(v, dtype=float))


def j_map(spec: HTypeGroupSpec, z, v) -> np.ndarray:
    """``J_z(v)``, defined by ``<J_z v, w> = <z, [v, w]>``."""
    return np.einsum("...k,...ki->...i", np.asarray(z, dtype=float), j_maps(spec, v))


def jacobian_field_coefficients(spec: HTypeGroupSpec, j: int, p) -> np.ndarray:
    """Coefficients of the frame field ``Y_j`` (0-based ``j``) on ``(d/dx_1..d/dx_m, d/dt_1..d/dt_n)``.

    Unrescaled groups: ``Y_j = X_j = d/dx_j + 1/2 sum_k (B[k] x)_j d/dt_k``.
    """
    if not 0 <= j < spec.m:
        raise DomainError(f"field index {j} out of range for m={spec.m}")
    x, _ = spec.split(p)
    d_col = spec.D[:, j]
    # X_i has d/dt_k coefficient (B[k] x)_i / 2; Y_j = sum_i D[i, j] X_i
    bx = np.einsum("kia,...a->...ki", spec.B, x)
    t_part = 0.5 * np.einsum("...ki,i->...k", bx, d_col)
    x_part = np.broadcast_to(d_col, x.shape)
    return np.concatenate([x_part, t_part], axis=-1)


def field_commutator(spec: HTypeGroupSpec, i: int, j: int, p, step: float = 1e-3) -> np.ndarray:
    """Numerical commutator ``[Y_i, Y_j]`` at ``p`` as a coefficient vector.

    Coefficients are affine in the coordinates, so central differences are exact
    up to rounding.
    """
    p = np.asarray(p, dtype=float)
    N = spec.N

    def directional(a, b):
        # (Y_a . grad) applied to the coefficients of Y_b
        va = jacobian_field_coefficients(spec, a, p)
        jac = np.empty((N, N))
        for c in range(N):
            e = np.zeros(N)
            e[c] = step
            jac[:, c] = (jacobian_field_coefficients(spec, b, p + e) - jacobian_field_coefficients(spec, b, p - e)) / (2 * step)
        return jac @ va

    return directional(i, j) - directional(j, i)


def check_bracket_convention(spec: HTypeGroupSpec, tol: float = 1e-9) -> float:
    """Compare :func:`bracket` with commutators of the frame fields at the origin.

    Raises :class:`NumericalConsistencyError` on mismatch and returns the max deviation.
    """
    worst = 0.0
    eye = np.eye(spec.m)
    for i in range(spec.m):
        for j in range(spec.m):
            comm = field_commutator(spec, i, j, spec.origin())
            expected = np.concatenate([np.zeros(spec.m), bracket(spec, eye[i], eye[j])])
            worst = max(worst, float(np.max(np.abs(comm - expected))))
    if worst > tol:
        raise NumericalConsistencyError(
            f"bracket convention disagrees with field commutators (deviation {worst:.3e})"
        )
    return worst


def validate_htype(spec: HTypeGroupSpec, tol: float = STRUCTURE_TOL) -> list[Violation]:
    """List every violated H-type invariant with its max entrywise deviation.

    Skew-symmetry is checked on the given matrices, orthogonality and
    anticommutation on the frame matrices (after rescale).
    """
    report = []
    eye = np.eye(spec.m)
    for k, Bk in enumerate(spec.B):
        dev = float(np.max(np.abs(Bk + Bk.T)))
        if dev > tol:
            report.append(Violation("skew_symmetry", (k,), dev))
    F = spec.frame_B
    for k, Fk in enumerate(F):
        dev = float(np.max(np.abs(Fk.T @ Fk - eye)))
        if dev > tol:
            report.append(Violation("orthogonality", (k,), dev))
    for a in range(spec.n):
        for b in range(a + 1, spec.n):
            dev = float(np.max(np.abs(F[a] @ F[b] + F[b] @ F[a])))
            if dev > tol:
                report.append(Violation("anticommutation", (a, b), dev))
    if spec.Q != spec.m + 2 * spec.n:
        report.append(Violation("homogeneous_dimension", (), float(abs(spec.Q - spec.m - 2 * spec.n))))
    if not any(v.kind == "skew_symmetry" for v in report):
        check_bracket_convention(spec)
    return report


def require_htype(spec: HTypeGroupSpec) -> HTypeGroupSpec:
    report = validate_htype(spec)
    if report:
        raise StructureError("not an H-type structure: " + "; ".join(map(str, report)))
    return spec


# ---------------------------------------------------------------- presets

_QUATERNION_UNITS = np.array(
    [
        # left multiplication by i, j, k on (a, b, c, d) ~ a + bi + cj + dk
        [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
        [[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]],
        [[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],
    ],
    dtype=float,
)


def heisenberg(k: int = 1) -> HTypeGroupSpec:
    """Heisenberg group H^k on R^{2k+1}, ``B = [[0, -I], [I, 0]]``."""
    if k < 1:
        raise DomainError("Heisenberg index must be >= 1")
    I = np.eye(k)
    Z = np.zeros((k, k))
    B = np.block([[Z, -I], [I, Z]])
    return HTypeGroupSpec(2 * k, 1, B[None], name=f"heisenberg:{k}")


def quaternionic(n: int = 2) -> HTypeGroupSpec:
    """Prototype group on R^4 x R^n (n <= 3) built from left multiplication by quaternion units."""
    if not 1 <= n <= 3:
        raise DomainError("quaternionic preset supports 1 <= n <= 3")
    return HTypeGroupSpec(4, n, _QUATERNION_UNITS[:n], name=f"quaternionic:{n}")


def r5_example(rescaled: bool = True) -> HTypeGroupSpec:
    """The R^5 group with ``B = diag-blocks(J, 2J)``; orthonormal frame ``X1, X2, X3/sqrt2, X4/sqrt2``."""
    B = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -2], [0, 0, 2, 0]], dtype=float)
    rescale = np.array([1.0, 1.0, 2**-0.5, 2**-0.5]) if rescaled else None
    return HTypeGroupSpec(4, 1, B[None], rescale=rescale, name="r5_example" if rescaled else "r5_example:raw")


def preset(name: str) -> HTypeGroupSpec:
    """Look up ``heisenberg:k``, ``quaternionic:n`` or ``r5_example``."""
    base, _, arg = name.partition(":")
    try:
        if base == "heisenberg":
            return heisenberg(int(arg or 1))
        if base == "quaternionic":
            return quaternionic(int(arg or 2))
        if base == "r5_example":
            if arg in ("", "rescaled"):
                return r5_example(True)
            if arg == "raw":
                return r5_example(False)
    except ValueError as exc:
        raise StructureError(f"bad preset argument in {name!r}") from exc
    raise StructureError(f"unknown group preset {name!r}")
