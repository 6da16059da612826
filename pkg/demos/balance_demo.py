"""The flux identity and its reduction to the gradient of boundary curvature.

First verifies the balancing identity on spherical caps spanned by flat
disks (the conormal flux equals 2 H0 times the vector area), then shows the
second-order reduction at a boundary point: the tangential part of the
expansion is pi * l * grad H, so its zeros are exactly the critical points
of the boundary mean curvature.

Run:  python demos/balance_demo.py
"""

import numpy as np

from cmclab import balance as bal
from cmclab import disk_maps as dm
from cmclab import implicit_domains as dom

print("== flux identity on spherical caps (H0 = 1) ==")
for h in (0.0, 0.3, 0.6, 0.9):
    cap = bal.spherical_cap_map(h, 256, 512)
    rim = np.sqrt(1 - h * h)
    disk = bal.flat_disk_map(rim, h, 256, 512)
    res = bal.balancing_residual(dm.boundary_trace(cap), disk, 1.0)
    print(f"  h = {h}: |residual| = {np.linalg.norm(res):.2e}"
          f"   (conormal flux z-component: {-2 * np.pi * (1 - h * h):+.4f})")

print("\n== reduced force vs grad H on the ellipsoid (2, 1.5, 1) ==")
e = dom.ellipsoid(2.0, 1.5, 1.0)
pts = dom.project_to_boundary(e, dom.fibonacci_sphere(6) * np.array([2, 1.5, 1]))
force = bal.reduced_force(e, pts, 1)
grad_h = dom.surface_grad_H(e, pts)
for p, f, g in zip(pts, force, grad_h):
    print(f"  at {np.round(p, 3)}: |force| = {np.linalg.norm(f):.4f},"
          f"  pi*|grad H| = {np.pi * np.linalg.norm(g):.4f}")

print("\n== zero sets coincide: the six axis endpoints ==")
crit = dom.find_critical_points(e, n_seeds=48, tol=1e-6)
zeros = bal.reduced_force_zeros(e, l=1, n_seeds=48, tol=1e-6)
for cp in crit.points:
    match = min(np.linalg.norm(cp.point - z) for z in zeros)
    print(f"  H-critical {np.round(cp.point, 4)} ({cp.label:<7} H = {cp.h_value:.4f})"
          f"  nearest force zero at distance {match:.1e}")

print("\n== second-order moment constant ==")
q = dom.project_to_boundary(e, np.array([1.0, 1.0, 0.5]))
jet = dom.normal_jet(e, q)
cfg = bal.CapConfiguration(centers=np.zeros((1, 2)))
got = bal.projected_second_order(jet, cfg)
trace = jet.d2_normal[:, 0, 0] + jet.d2_normal[:, 1, 1]
closed = -(np.pi / 2) * trace
closed -= (closed @ jet.normal) * jet.normal
print(f"  quadrature:  {got}")
print(f"  -(pi/2) tr:  {closed}")
