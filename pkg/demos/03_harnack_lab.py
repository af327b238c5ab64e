"""Finite-difference Dirichlet solves, Harnack quotients and a critical-density sweep.

Run: python demos/03_harnack_lab.py   (about half a minute)
"""
# %%
import numpy as np

from htype_harnack import heisenberg
from htype_harnack.gauge import gauge_norm
from htype_harnack.harnack_lab import (
    BoundaryData,
    GridSpec,
    boundary_preset,
    critical_density_sweep,
    dilation_consistency,
    harnack_refinement,
    solve,
)
from htype_harnack.operator import identity_field, rotating_field

H = heisenberg(1)

# %% Convergence against the fundamental solution d^{2-Q} on a box away from the pole
exact = lambda p: gauge_norm(H, p) ** (2 - H.Q)  # noqa: E731
box = GridSpec([0.75, 0.0, 0.0], [0.25, 0.25, 0.1], 9)
prev = None
for grid in (box, box.refined(), box.refined().refined()):
    sol = solve(grid, identity_field(2), H, BoundaryData(exact, {"name": "fundamental"}))
    err = np.max(np.abs(sol.flat - exact(grid.nodes())))
    rate = "" if prev is None else f"  order {np.log2(prev / err):.2f}"
    print(f"resolution {grid.resolution[0]:2d}: max error {err:.3e}{rate}  ({sol.solver})")
    prev = err

# %% Harnack quotient sup/inf over B_1 for boundary data 1 + sin(x1)/2
rep = harnack_refinement(identity_field(2), H, boundary_preset("sine", H), R=1.0, resolutions=(17, 33))
for row in rep.trace:
    print(row)

# %% Dilation covariance of the discretization
rep = dilation_consistency(rotating_field([1.0, 1.3], rate=2.0), H, [0.5, 2.0], resolution=17, x0=[0, 0, 0.2])
print(rep.as_dict())

# %% Critical-density sweep over random Landis-compliant fields
sweep = critical_density_sweep(H, cases=20, seed=0, resolution=13)
print({k: sweep.summary[k] for k in ("cases", "counterexamples", "claims_triggered", "inf_half_below_c",
                                     "epsilon_min", "max_quotient")})
