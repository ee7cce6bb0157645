"""
The discretized Bergman projection
==================================

Assemble P on the mesh, watch it reproduce a kernel function, and compare
the weighted norm of a commutator with the BMO norm of its symbol.
"""

import numpy as np

from bergman_lab import operators as op
from bergman_lab import symbols as sy
from bergman_lab import weights as wt
from bergman_lab.geometry import GlobalConfig, Mesh

w0 = 0.3 + 1.0j
for k_min in (-3, -4):
    mesh = Mesh(GlobalConfig(k_min=k_min, k_max=4, x_extent=16.0))
    P = op.assemble_bergman(mesh)
    k = op.bergman_kernel(mesh.nodes, np.full(mesh.N, w0), mesh.alpha)
    w = mesh.quad_weights
    err = np.sqrt(np.sum(np.abs(P @ k - k) ** 2 * w) / np.sum(np.abs(k) ** 2 * w))
    print(f"N = {mesh.N:5d}: relative error of P k_w0 = {err:.4f}")

# the commutator identity [b, P] = H_b - H_conj(b)^* holds to rounding
mesh = Mesh(GlobalConfig())
P = op.assemble_bergman(mesh)
b = sy.holo_log()
C = op.commutator(P, b)
R = op.hankel(P, b).matrix - op.hankel(P, b.conj()).adjoint().matrix
print(f"identity defect: {np.max(np.abs(C.matrix - R)):.2e}")

# two-weight norms with the Bloom weight nu = mu^1/2 lambda^-1/2
mu, lam = wt.power_weight(0.5), wt.power_weight(-0.5)
nu = wt.bloom_nu(mu, lam)
for name, f in sy.HOLOMORPHIC_LIBRARY.items():
    if name in ("z", "z^2"):
        continue
    b = f()
    n = op.weighted_operator_norm(op.commutator(P, b), mu, lam, mesh).value
    bmo = sy.bmo_nu_norm(b, nu, mesh, mode="exact").value
    print(f"{name:>10}: ||[b,P]|| = {n:.4f}, ||b||_BMO(nu) = {bmo:.4f}, ratio {n / bmo:.3f}")
