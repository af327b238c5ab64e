"""Cordes-Landis margins and the barrier lower bound.

Run: python demos/02_landis_and_barrier.py
"""
# %%
import numpy as np

from htype_harnack import gauge_constants, heisenberg
from htype_harnack.barrier import ball_region, ball_test_points, constant_chain, verify_barrier_lemma
from htype_harnack.exceptions import PreconditionError
from htype_harnack.operator import EllipticityBounds, constant_field, delta_from_ratio, identity_field, landis_delta_pointwise

H = heisenberg(1)

# %% On H^1 the margin of diag(1, L) is 7 - 5L; it closes at L = 7/5
for L in (1.0, 1.2, 1.35, 1.4, 1.5):
    print(f"L = {L:4.2f}: delta = {landis_delta_pointwise(np.diag([1.0, L]), H.Q):+.4f}, "
          f"ratio bound = {delta_from_ratio(EllipticityBounds(1.0, L), H.Q):+.4f}")

# %% Barrier verification on B_1/2, test points on the closed B_1/4
constants = gauge_constants(H, seed=0)
region = ball_region(H, H.origin(), 0.5)
pts = ball_test_points(H, H.origin(), 0.25)
for name, fld in [("identity", identity_field(2)), ("diag(1,1.35)", constant_field(np.diag([1.0, 1.35]))),
                  ("diag(1,1.6)", constant_field(np.diag([1.0, 1.6])))]:
    try:
        v = verify_barrier_lemma(fld, H, region, pts, constants=constants)
        print(f"{name:13s} delta={v.delta:.3f} C={v.C:.4f} margin={v.margin_min:+.4f} +- {v.stderr:.3f} -> {v.verdict}")
    except PreconditionError as exc:
        print(f"{name:13s} gated: {exc}")

# %% Constant chain for A = I: C = 1/beta, gamma = pi/(2 sqrt 2)
chain = constant_chain(H, EllipticityBounds(1.0, 1.0), 2.0, constants)
print(chain.as_dict())
print("reference eps =", (14 * np.sqrt(2) / 768) ** 2)
