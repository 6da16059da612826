"""Boundary curvature geometry of the built-in container domains.

Shows the level-set geometry toolkit: exterior normals, shape operator,
mean curvature H and its surface gradient, normal jets, and the seeded
Newton search for critical points of H.

Run:  python demos/critical_points_demo.py
"""

import numpy as np

from cmclab import implicit_domains as dom

for domain in (dom.ball(1.0), dom.ellipsoid(2.0, 1.5, 1.0), dom.bumpy_ball(1.0, 0.05)):
    print(f"== {domain.name} ==")
    search = dom.find_critical_points(domain, n_seeds=64, tol=1e-6)
    if search.h_constant:
        print(f"  H is constant (= {search.h_value:.4f}); every point is critical\n")
        continue
    for cp in search.points:
        print(f"  {np.round(cp.point, 4)}  H = {cp.h_value: .5f}  ({cp.label})")
    print()

e = dom.ellipsoid(2.0, 1.5, 1.0)
q = dom.project_to_boundary(e, np.array([1.0, 1.0, 0.5]))
jet = dom.normal_jet(e, q)
print("normal jet at a generic ellipsoid point", np.round(q, 4))
print("  normal:", np.round(jet.normal, 4))
print("  dN in the tangent basis:\n", np.round(jet.d_normal, 4))
print("  |grad H| =", np.linalg.norm(dom.surface_grad_H(e, q)))
