"""Groups, the Kaplan gauge and its constants.

Run: python demos/01_groups_and_gauge.py
"""
# %%
import numpy as np

from htype_harnack import gauge_constants, gauge_norm, phi, preset, validate_htype
from htype_harnack.gauge import ball_volume, horizontal_gradient_d, mean_value_beta
from htype_harnack.group import compose, dilate, inverse, r5_example

# %% Presets and structure checks
for name in ("heisenberg:1", "heisenberg:2", "quaternionic:2", "r5_example"):
    spec = preset(name)
    print(f"{name:15s} m={spec.m} n={spec.n} Q={spec.Q} violations={validate_htype(spec)}")

# without its rescaling the R^5 example is not H-type
print("r5 raw:", [v.kind for v in validate_htype(r5_example(rescaled=False))])

# %% Group law, dilations, gauge
H = preset("heisenberg:1")
p = np.array([1.0, 0.0, 0.0])
q = np.array([0.0, 1.0, 0.0])
print("p o q =", compose(H, p, q), " q o p =", compose(H, q, p))
print("p^-1 o p =", compose(H, inverse(H, p), p))
print("d(p) =", gauge_norm(H, p), " d(0,0,1/4) =", gauge_norm(H, [0, 0, 0.25]), " phi(1,0,1) =", phi(H, [1, 0, 1]))
print("d(delta_3 p) / d(p) =", gauge_norm(H, dilate(H, 3.0, [0.3, 0.2, 0.1])) / gauge_norm(H, [0.3, 0.2, 0.1]))

# %% |grad_H d|^2 equals |v|^2 / d^2
rng = np.random.default_rng(0)
pts = rng.normal(size=(5, 3))
g = horizontal_gradient_d(H, pts)
print("|grad_H d|^2      :", np.round(np.sum(g * g, 1), 12))
print("|v|^2 / d^2       :", np.round(np.sum(pts[:, :2] ** 2, 1) / gauge_norm(H, pts) ** 2, 12))

# %% Constants: |B_1| = pi^2/8 on H^1, beta close to 1/pi
print("|B_1| =", ball_volume(H).value, " pi^2/8 =", np.pi**2 / 8)
b = mean_value_beta(H, seed=0)
print(f"beta = {b.beta:.6f} +- {b.stderr:.1e} (surface route {b.beta_surface:.10f}, 1/pi = {1 / np.pi:.10f})")
print(gauge_constants(H, seed=0))
