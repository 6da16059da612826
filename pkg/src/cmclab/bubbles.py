"""Exact rational bubbles: finite-energy solutions of Delta u = -2 u_x ^ u_y.

Every bubble is an inverse stereographic projection of a rational map,
pi_N^{-1}(P(w)/Q(w)) + C with w = (z - a)/lambda, so the whole family is
closed-form: values, gradient magnitude, energy (8*pi*k on the plane,
4*pi*k on the half-plane, k = max degree) and boundary traces are all
computable without discretization.  Half-plane bubbles are parametrized
over the upper half-plane {Im w > 0} with boundary on the real axis.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import PoleInput, ReducibleFraction

NORTH = np.array([0.0, 0.0, 1.0])
SATURATION_RADIUS = 1e8


# ---------------------------------------------------------------------------
# stereographic projection with a movable pole
# ---------------------------------------------------------------------------

def pole_rotation(pole):
    """Deterministic rotation taking the north pole (0,0,1) to ``pole``."""
    n = np.asarray(pole, float)
    n = n / np.linalg.norm(n)
    if n[2] > 1.0 - 1e-14:
        return np.eye(3)
    if n[2] < -1.0 + 1e-14:
        # half-turn about the x-axis
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross(NORTH, n)
    s = np.linalg.norm(axis)
    axis = axis / s
    c = n[2]
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def inv_stereographic(z, pole=NORTH, with_flag=False):
    """Inverse stereographic projection C -> S^2 minus the pole.

    For the north pole this is (2 Re z, 2 Im z, |z|^2 - 1)/(1 + |z|^2);
    a general pole composes with the deterministic pole rotation.  Inputs
    with |z| > 1e8 saturate to the pole itself; the optional flag reports
    which entries saturated.
    """
    z = np.asarray(z, complex)
    d = 1.0 + np.abs(z) ** 2
    pts = np.stack([2 * z.real / d, 2 * z.imag / d, (np.abs(z) ** 2 - 1) / d], axis=-1)
    sat = np.abs(z) > SATURATION_RADIUS
    R = pole_rotation(pole)
    out = pts @ R.T
    if np.any(sat):
        out = np.where(sat[..., None], np.asarray(pole, float), out)
    if with_flag:
        return out, sat
    return out


def stereographic(p, pole=NORTH):
    """Stereographic projection S^2 minus ``pole`` -> C (inverse of the above)."""
    p = np.asarray(p, float)
    R = pole_rotation(pole)
    q = p @ R
    denom = 1.0 - q[..., 2]
    if np.any(np.abs(denom) < 1e-14):
        raise PoleInput("stereographic projection evaluated at its pole")
    return (q[..., 0] + 1j * q[..., 1]) / denom


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients lowest-order first)
# ---------------------------------------------------------------------------

def _trim(coeffs):
    c = np.atleast_1d(np.asarray(coeffs, complex))
    scale = np.abs(c).max()
    if scale == 0.0:
        return np.zeros(1, complex)
    tol = 1e-13 * scale
    deg = len(c) - 1
    while deg > 0 and abs(c[deg]) <= tol:
        deg -= 1
    return c[: deg + 1].copy()


def poly_degree(coeffs):
    return len(_trim(coeffs)) - 1


def resultant(p_coeffs, q_coeffs):
    """Resultant of two polynomials via the Sylvester determinant."""
    p = _trim(p_coeffs)
    q = _trim(q_coeffs)
    m, n = len(p) - 1, len(q) - 1
    if m == 0:
        return p[0] ** n
    if n == 0:
        return q[0] ** m
    S = np.zeros((m + n, m + n), complex)
    for i in range(n):
        S[i, i : i + m + 1] = p[::-1]
    for i in range(m):
        S[n + i, i : i + n + 1] = q[::-1]
    return np.linalg.det(S)


def _coefficient_scale(p, q):
    return max(np.abs(_trim(p)).max(), np.abs(_trim(q)).max(), 1e-300)


def is_irreducible(p_coeffs, q_coeffs):
    """Numerical irreducibility: |res(P, Q)| > 1e-10 * scale^(deg P + deg Q)."""
    p, q = _trim(p_coeffs), _trim(q_coeffs)
    degs = (len(p) - 1) + (len(q) - 1)
    tol = 1e-10 * _coefficient_scale(p, q) ** degs
    return abs(resultant(p, q)) > tol


def reduce_fraction(p_coeffs, q_coeffs):
    """Cancel numerically common roots of P and Q.

    Returns (p_reduced, q_reduced, reduced_flag); root matching tolerance is
    1e-8 relative to the root magnitudes.
    """
    p, q = _trim(p_coeffs), _trim(q_coeffs)
    if len(p) == 1 or len(q) == 1:
        return p, q, False
    rp = npoly.polyroots(p)
    rq = list(npoly.polyroots(q))
    keep_p, removed = [], False
    for root in rp:
        hit = None
        for i, other in enumerate(rq):
            if abs(root - other) <= 1e-8 * (1.0 + abs(root) + abs(other)):
                hit = i
                break
        if hit is None:
            keep_p.append(root)
        else:
            rq.pop(hit)
            removed = True
    if not removed:
        return p, q, False
    p_new = p[-1] * npoly.polyfromroots(keep_p)
    q_new = q[-1] * npoly.polyfromroots(rq)
    return _trim(p_new), _trim(q_new), True


# ---------------------------------------------------------------------------
# the bubble family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalBubble:
    """Bubble pi_pole^{-1}(P(w)/Q(w)) + shift with w = (z - center)/scale.

    ``kind`` distinguishes whole-plane bubbles (spheres) from half-plane
    bubbles (hemispheres, domain {Im w > 0} with boundary trace on a plane).
    Coefficients are complex, lowest order first.
    """

    pole: np.ndarray = field(default_factory=lambda: NORTH.copy())
    p_coeffs: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0], complex))
    q_coeffs: np.ndarray = field(default_factory=lambda: np.array([1.0], complex))
    shift: np.ndarray = field(default_factory=lambda: np.zeros(3))
    center: complex = 0.0 + 0.0j
    scale: float = 1.0
    kind: str = "plane"

    def __post_init__(self):
        object.__setattr__(self, "pole", np.asarray(self.pole, float))
        object.__setattr__(self, "p_coeffs", _trim(self.p_coeffs))
        object.__setattr__(self, "q_coeffs", _trim(self.q_coeffs))
        object.__setattr__(self, "shift", np.asarray(self.shift, float))
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "scale", float(self.scale))
        if self.scale <= 0:
            raise ValueError("bubble scale must be positive")
        if self.kind not in ("plane", "half_plane"):
            raise ValueError(f"unknown bubble kind {self.kind!r}")
        if np.abs(self.p_coeffs).max() == 0 and np.abs(self.q_coeffs).max() == 0:
            raise ValueError("P and Q cannot both vanish")

    @property
    def degree(self):
        return max(poly_degree(self.p_coeffs), poly_degree(self.q_coeffs))


class SimpleCheck(NamedTuple):
    simple: bool
    reduced: bool
    degree: int


def eval_bubble(bubble, z):
    """Evaluate the bubble at complex points; Q(w) = 0 maps to the pole point.

    Uses the homogeneous form (2 Re(P conj(Q)), 2 Im(P conj(Q)),
    |P|^2 - |Q|^2)/(|P|^2 + |Q|^2), which has no division by Q.
    """
    z = np.asarray(z, complex)
    w = (z - bubble.center) / bubble.scale
    P = npoly.polyval(w, bubble.p_coeffs)
    Q = npoly.polyval(w, bubble.q_coeffs)
    pq = P * np.conj(Q)
    denom = np.abs(P) ** 2 + np.abs(Q) ** 2
    bad = denom == 0.0
    denom = np.where(bad, 1.0, denom)
    pts = np.stack([2 * pq.real, 2 * pq.imag, np.abs(P) ** 2 - np.abs(Q) ** 2], axis=-1) / denom[..., None]
    pts = np.where(bad[..., None], np.array([0.0, 0.0, 1.0]), pts)
    R = pole_rotation(bubble.pole)
    return pts @ R.T + bubble.shift


def bubble_gradient_norm(bubble, z):
    """|grad| of the concentrated bubble: 2*sqrt(2)|P'Q - Q'P|/(|P|^2+|Q|^2) / scale."""
    z = np.asarray(z, complex)
    w = (z - bubble.center) / bubble.scale
    P = npoly.polyval(w, bubble.p_coeffs)
    Q = npoly.polyval(w, bubble.q_coeffs)
    dP = npoly.polyval(w, npoly.polyder(bubble.p_coeffs))
    dQ = npoly.polyval(w, npoly.polyder(bubble.q_coeffs))
    return 2.0 * np.sqrt(2.0) * np.abs(dP * Q - dQ * P) / (np.abs(P) ** 2 + np.abs(Q) ** 2) / bubble.scale


def far_point(bubble):
    """Limit of the bubble as |z| -> infinity."""
    p, q = bubble.p_coeffs, bubble.q_coeffs
    dp, dq = poly_degree(p), poly_degree(q)
    if dp > dq:
        tip = np.asarray(bubble.pole, float)
    elif dp < dq:
        tip = inv_stereographic(0.0, bubble.pole)
    else:
        tip = inv_stereographic(p[dp] / q[dq], bubble.pole)
    return tip + bubble.shift


def is_simple(bubble):
    """Once-covered test: irreducible after numerical gcd, max degree 1.

    Returns a named tuple (simple, reduced, degree) so callers can see when
    a gcd reduction was applied before the degree test.
    """
    p, q = bubble.p_coeffs, bubble.q_coeffs
    reduced = False
    if not is_irreducible(p, q):
        p, q, reduced = reduce_fraction(p, q)
    deg = max(poly_degree(p), poly_degree(q))
    return SimpleCheck(simple=(deg == 1), reduced=reduced, degree=deg)


def bubble_energy(bubble, rtol_nodes=(24, 128)):
    """Dirichlet energy and covering degree of a bubble.

    The closed-form |grad|^2 is integrated over the plane with dyadic annuli
    (Gauss-Legendre radial nodes, trapezoid in angle) out to |w| = 2^20 plus
    the |w|^-4 tail estimate.  Half-plane bubbles extend by reflection, so
    their energy over the half domain is half the plane integral (4*pi*k).
    Raises ReducibleFraction when P/Q fails the resultant test.
    """
    if not is_irreducible(bubble.p_coeffs, bubble.q_coeffs):
        raise ReducibleFraction("P/Q is numerically reducible; reduce before computing energy")
    k = bubble.degree
    n_rad, n_ang = rtol_nodes
    gauss_x, gauss_w = np.polynomial.legendre.leggauss(n_rad)
    theta = 2 * np.pi * np.arange(n_ang) / n_ang
    unit = np.exp(1j * theta)

    probe = replace(bubble, center=0.0, scale=1.0, shift=np.zeros(3))

    def ring_integral(r0, r1):
        rad = 0.5 * (r1 - r0) * gauss_x + 0.5 * (r1 + r0)
        wts = 0.5 * (r1 - r0) * gauss_w
        w = rad[:, None] * unit[None, :]
        dens = bubble_gradient_norm(probe, w) ** 2
        return np.sum(dens * rad[:, None] * wts[:, None]) * (2 * np.pi / n_ang)

    total = ring_integral(0.0, 1.0)
    edges = 2.0 ** np.arange(0, 21)
    for r0, r1 in zip(edges[:-1], edges[1:]):
        total += ring_integral(r0, r1)
    # tail: the integrand decays like a/|w|^4 beyond the last edge
    R = edges[-1]
    a_est = np.mean(bubble_gradient_norm(probe, R * unit) ** 2) * R**4
    total += np.pi * a_est / R**2
    if bubble.kind == "half_plane":
        total *= 0.5
    return float(total), k


def concentration(bubble):
    """Canonical concentration data (argmax of |grad|, 2*sqrt(2)/max |grad|).

    Gauge-invariant for degree-1 bubbles; equals (center, scale) for the
    standard constructors.
    """
    if bubble.degree != 1:
        raise ValueError("canonical concentration is defined for degree-1 bubbles")
    p = np.concatenate([bubble.p_coeffs, np.zeros(2 - len(bubble.p_coeffs), complex)])[:2]
    q = np.concatenate([bubble.q_coeffs, np.zeros(2 - len(bubble.q_coeffs), complex)])[:2]
    lam, a = bubble.scale, bubble.center
    alpha, beta = p[1] / lam, p[0] - p[1] * a / lam
    gamma, delta = q[1] / lam, q[0] - q[1] * a / lam
    zstar = -(np.conj(alpha) * beta + np.conj(gamma) * delta) / (abs(alpha) ** 2 + abs(gamma) ** 2)
    denom = abs(alpha * zstar + beta) ** 2 + abs(gamma * zstar + delta) ** 2
    grad_max = 2 * np.sqrt(2.0) * abs(alpha * delta - beta * gamma) / denom
    return complex(zstar), float(2 * np.sqrt(2.0) / grad_max)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def sphere_bubble(center=0.0, scale=1.0, pole=NORTH, image_center=(0.0, 0.0, 0.0)):
    """Simple whole-plane bubble: unit sphere centered at ``image_center``."""
    shift = np.asarray(image_center, float)
    return RationalBubble(pole=np.asarray(pole, float), p_coeffs=[0.0, 1.0], q_coeffs=[1.0],
                          shift=shift, center=center, scale=scale, kind="plane")


def rotate_bubble(bubble, rotation):
    """Rigidly rotate the bubble image about its shift point.

    The rotation is absorbed exactly: the pole moves to R @ pole and P picks
    up the residual phase about the new pole axis.
    """
    R = np.asarray(rotation, float)
    new_pole = R @ bubble.pole
    M = pole_rotation(new_pole).T @ R @ pole_rotation(bubble.pole)
    alpha = np.arctan2(M[1, 0], M[0, 0])
    return replace(bubble, pole=new_pole, p_coeffs=np.exp(1j * alpha) * bubble.p_coeffs)


def rotate_parameter(bubble, unit):
    """Precompose the rational map with w -> unit * w (|unit| = 1)."""
    u = complex(unit)
    powers_p = u ** np.arange(len(bubble.p_coeffs))
    powers_q = u ** np.arange(len(bubble.q_coeffs))
    return replace(bubble, p_coeffs=bubble.p_coeffs * powers_p, q_coeffs=bubble.q_coeffs * powers_q)


def hemisphere_bubble(center_2d=(0.0, 0.0), scale=1.0, tilt=None):
    """Upper unit hemisphere over the half-plane {Im w > 0}.

    The rational map (w + i)/(w - i) sends the real axis to the unit circle
    and the upper half-plane to its exterior, so the image is the closed
    upper hemisphere of the unit sphere; the boundary trace is the circle of
    radius one in the plane {x3 = 0} centered at ``center_2d``.  ``tilt``
    (a 3x3 rotation) rigidly rotates the image about the circle center.
    """
    cx, cy = center_2d
    bubble = RationalBubble(pole=NORTH.copy(), p_coeffs=[1j, 1.0], q_coeffs=[-1j, 1.0],
                            shift=np.array([cx, cy, 0.0]), center=0.0, scale=scale,
                            kind="half_plane")
    if tilt is not None:
        bubble = rotate_bubble(bubble, tilt)
    return bubble


def disk_to_half_plane(z):
    """Conformal isomorphism of the unit disk minus {1} onto the upper half-plane."""
    z = np.asarray(z, complex)
    return -1j * (z + 1.0) / (z - 1.0)


def half_plane_to_disk(w):
    """Inverse of disk_to_half_plane (the Cayley map)."""
    w = np.asarray(w, complex)
    return (w - 1j) / (w + 1j)


def mobius_compose(bubble, coeffs):
    """Reparametrize by the Mobius map w -> (a w + b)/(c w + d).

    Builds the numerator/denominator pair of P((aw+b)/(cw+d)) and
    Q((aw+b)/(cw+d)) cleared to a common power of (cw + d); the image set
    and the energy are unchanged.
    """
    a, b, c, d = [complex(v) for v in coeffs]
    if abs(a * d - b * c) < 1e-14:
        raise ValueError("Mobius coefficients are singular")
    k = max(poly_degree(bubble.p_coeffs), poly_degree(bubble.q_coeffs))
    num = np.array([b, a], complex)
    den = np.array([d, c], complex)

    def compose(coeffs_in):
        coeffs_in = _trim(coeffs_in)
        out = np.zeros(k + 1, complex)
        for j, cj in enumerate(coeffs_in):
            term = np.array([cj], complex)
            for _ in range(j):
                term = npoly.polymul(term, num)
            for _ in range(k - j):
                term = npoly.polymul(term, den)
            out[: len(term)] += term
        return out

    return replace(bubble, p_coeffs=compose(bubble.p_coeffs), q_coeffs=compose(bubble.q_coeffs))


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------

def _complex_pairs(coeffs):
    return [[float(c.real), float(c.imag)] for c in np.atleast_1d(coeffs)]


def bubble_to_dict(bubble):
    """Structured-text form of a bubble (complex numbers as [re, im] pairs)."""
    return {
        "kind": bubble.kind,
        "pole": [float(v) for v in bubble.pole],
        "p": _complex_pairs(bubble.p_coeffs),
        "q": _complex_pairs(bubble.q_coeffs),
        "shift": [float(v) for v in bubble.shift],
        "center": [bubble.center.real, bubble.center.imag],
        "scale": bubble.scale,
    }


def bubble_from_dict(d):
    """Bubble from its structured-text form; also accepts presets.

    Presets: {"preset": "sphere", "center": [re, im], "scale": s,
    "image_center": [x, y, z]} and {"preset": "hemisphere",
    "boundary_angle": t, "scale": s, "center_2d": [x, y]} (the hemisphere is
    planted at the disk-boundary point e^{it} with its local half-plane
    aligned to the disk interior).
    """
    preset = d.get("preset")
    if preset == "sphere":
        cr, ci = d.get("center", (0.0, 0.0))
        return sphere_bubble(center=complex(cr, ci), scale=float(d.get("scale", 1.0)),
                             image_center=d.get("image_center", (0.0, 0.0, 0.0)))
    if preset == "hemisphere":
        angle = float(d.get("boundary_angle", 0.0))
        b = hemisphere_bubble(center_2d=d.get("center_2d", (0.0, 0.0)),
                              scale=float(d.get("scale", 1.0)))
        b = rotate_parameter(b, -1j * np.exp(-1j * angle))
        return replace(b, center=np.exp(1j * angle))
    if preset is not None:
        raise ValueError(f"unknown bubble preset {preset!r}")
    p = [complex(re, im) for re, im in d["p"]]
    q = [complex(re, im) for re, im in d["q"]]
    cr, ci = d.get("center", (0.0, 0.0))
    return RationalBubble(pole=d.get("pole", NORTH), p_coeffs=p, q_coeffs=q,
                          shift=d.get("shift", (0.0, 0.0, 0.0)),
                          center=complex(cr, ci), scale=float(d.get("scale", 1.0)),
                          kind=d.get("kind", "plane"))


# ---------------------------------------------------------------------------
# synthetic concentrating maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSequence:
    """Recipe for concentrating disk maps built from planted bubbles.

    Bubble scales are per-unit-epsilon: at parameter eps the planted bubble
    concentrates at scale ``bubble.scale * eps`` around its center.  Noise is
    a seeded low-order polynomial perturbation of amplitude ``noise_amp``
    (smooth, so stencil responses stay bounded under refinement).
    """

    bubbles: tuple
    epsilon_schedule: tuple = (1.0,)
    noise_amp: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bubbles", tuple(self.bubbles))
        eps = tuple(float(e) for e in self.epsilon_schedule)
        if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ValueError("epsilon_schedule must be strictly decreasing")
        object.__setattr__(self, "epsilon_schedule", eps)
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be nonnegative")


def _polynomial_noise(z, amp, rng):
    """Smooth seeded perturbation: degree <= 3 polynomial in (x, y) per component."""
    x, y = z.real, z.imag
    basis = np.stack([x, y, x * y, x * x - y * y, x * x + y * y,
                      x**3 - 3 * x * y * y, 3 * x * x * y - y**3], axis=-1)
    coeffs = rng.standard_normal((basis.shape[-1], 3))
    noise = basis @ coeffs
    peak = np.abs(noise).max()
    return amp * noise / peak if peak > 0 else noise


def synth_sequence(seq, eps, n_r=256, n_theta=256, h_target=1.0):
    """Sample the superposed planted bubbles on the polar grid at parameter eps.

    Bubbles are summed in straightened coordinates (the container boundary is
    the plane {x3 = 0}) with their far values anchored at the origin, so the
    field of each bubble decays at distance from its center and the residual
    of the exact subtraction is the noise term alone.  Ground-truth
    parameters are recorded in the returned map's metadata.
    """
    from .disk_maps import DiskMap  # local import: disk_maps does not import bubbles

    grid_z = None
    rng = np.random.default_rng(seq.seed)
    from .polar_grid import get_grid

    grid = get_grid(n_r, n_theta)
    grid_z = grid.nodes_complex()
    values = np.zeros(grid_z.shape + (3,))
    truth = []
    for b in seq.bubbles:
        eff = replace(b, scale=b.scale * eps)
        anchored = replace(eff, shift=eff.shift - far_point(replace(eff, shift=np.zeros(3))))
        values += eval_bubble(anchored, grid_z)
        a_star, lam_star = concentration(anchored)
        truth.append({
            "kind": b.kind,
            "center": a_star,
            "scale": lam_star,
            "bubble": anchored,
        })
    if seq.noise_amp > 0:
        values = values + _polynomial_noise(grid_z, seq.noise_amp, rng)
    meta = {"ground_truth": truth, "epsilon": float(eps), "seed": seq.seed,
            "noise_amp": seq.noise_amp}
    return DiskMap(values=values, h_target=h_target, meta=meta)
