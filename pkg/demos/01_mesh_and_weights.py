"""
Whitney mesh and weight characteristics
=======================================

Build the truncated mesh of upper boxes and look at the B2 and APR
characteristics of a few weights.
"""

import numpy as np

from bergman_lab import weights as wt
from bergman_lab.geometry import GlobalConfig, Mesh, whitney_radius

# nine dyadic levels, 2^-5 .. 2^3, over [-8, 8]
mesh = Mesh(GlobalConfig())
print(f"cells: {mesh.N}, Whitney radius: {whitney_radius(mesh):.5f}")

# the cells tile the region, so their measures add up to its dA measure
print(f"total measure: {mesh.total_measure():.6f}")

# power weights: B2 is 1/(1 - s^2) for |s| < 1 and infinite otherwise,
# APR is 2^|s| whatever s is
for s in (0.0, 0.25, 0.5, 0.9, 1.0):
    w = wt.power_weight(s)
    b2 = wt.b2_characteristic(w, mesh)
    ref = 1 / (1 - s * s) if s < 1 else np.inf
    print(f"y^{s:<4}  B2 {b2:8.4f}  (closed form {ref:.4f})  APR {wt.apr_constant(w, mesh):.4f}")

# averaging over mesh cells instead of the full boxes loses the bottom of
# every box, which biases B2 low
w = wt.power_weight(0.5)
for mode in ("exact", "truncated", "mesh"):
    print(f"{mode:>9}: {wt.b2_characteristic(w, mesh, mode=mode):.4f}")

# a B2 weight that is not APR: it blows up along the line Im z = 1/2
c = wt.apr_counterexample()
print(f"counterexample weight: B2 {wt.b2_characteristic(c, mesh):.4f}, "
      f"APR {wt.apr_constant(c, mesh)}")
