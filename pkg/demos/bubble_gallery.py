"""Tour of the exact bubble families.

Every finite-energy solution of the limit H-system on the plane is an
inverse stereographic projection of a rational map, so everything here is
closed form: energies quantize to 8*pi per covering degree, half-plane
solutions carry exactly half of that, and the boundary trace of a
hemisphere is a circle of radius one no matter how it is translated,
scaled or tilted.

Run:  python demos/bubble_gallery.py
"""

import numpy as np

from cmclab import bubbles as bub

print("== energy quantization ==")
for k in (1, 2, 3):
    coeffs = np.zeros(k + 1, complex)
    coeffs[-1] = 1.0
    bubble = bub.RationalBubble(p_coeffs=coeffs, q_coeffs=[1.0])
    energy, degree = bub.bubble_energy(bubble)
    print(f"  P = w^{k}, Q = 1: degree {degree}, energy/8pi = {energy / (8 * np.pi):.9f}")

hemi = bub.hemisphere_bubble()
energy, _ = bub.bubble_energy(hemi)
print(f"  hemisphere: energy/4pi = {energy / (4 * np.pi):.9f}")

print("\n== gradient concentration ==")
for lam in (1.0, 0.1, 0.01):
    b = bub.sphere_bubble(center=0.0, scale=lam)
    g = bub.bubble_gradient_norm(b, 0.0)
    print(f"  scale {lam:5}: max |grad| = {g:10.3f}  (2*sqrt(2)/scale = {2 * np.sqrt(2) / lam:.3f})")

print("\n== hemisphere boundary circle ==")
tilt = np.array([[1, 0, 0],
                 [0, np.cos(0.3), -np.sin(0.3)],
                 [0, np.sin(0.3), np.cos(0.3)]])
for name, b in [("flat", bub.hemisphere_bubble(center_2d=(0.5, -0.25))),
                ("tilted 0.3 rad", bub.hemisphere_bubble(tilt=tilt))]:
    t = np.tan(np.pi * (np.linspace(0.02, 0.98, 513) - 0.5))
    trace = bub.eval_bubble(b, t)
    center = trace.mean(axis=0)
    radii = np.linalg.norm(trace - center, axis=-1)
    print(f"  {name}: trace radius = {radii.mean():.9f} +- {radii.std():.2e}")

print("\n== Moebius reparametrization invariance ==")
base = bub.RationalBubble(p_coeffs=[0.0, 0.0, 1.0], q_coeffs=[1.0])
e0, _ = bub.bubble_energy(base)
moved = bub.mobius_compose(base, (1 + 0.5j, 0.3, -0.2j, 1.1))
e1, _ = bub.bubble_energy(moved)
print(f"  degree-2 energy before/after reparametrization: {e0:.9f} / {e1:.9f}")
