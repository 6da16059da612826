"""Discrete calculus on sampled maps of the unit disk into R^3.

A DiskMap holds R^3 samples on the shared polar grid (cell-centered radii
plus a boundary ring at r = 1) together with the target mean curvature of
the H-system Delta u = -2 H u_x ^ u_y, written with the geometer's sign
Delta = -(d_xx + d_yy).  The module provides the residuals, defects,
energies and traces used everywhere else, the boundary straightening of a
container domain, and the reflection extension across the boundary ring.

DMAP file format (bit-exact): ASCII header ``DMAP 1 <n_r> <n_theta>
<H_target>\n`` followed by little-endian float64 triples in row-major
(radial index, angular index, component) order, boundary ring last.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryOffDomain, ChartTooLarge, FormatError
from .implicit_domains import boundary_normal, project_to_boundary, shape_operator, tangent_basis
from .polar_grid import fd_weights, get_grid


@dataclass
class DiskMap:
    """Sampled map u: unit disk -> R^3 on the polar grid.

    ``values`` has shape (n_r + 1, n_theta, 3): rows 0..n_r-1 are the
    cell-centered radii, row n_r is the boundary ring at r = 1.
    """

    values: np.ndarray
    h_target: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.ndim != 3 or self.values.shape[2] != 3:
            raise ValueError("values must have shape (n_r + 1, n_theta, 3)")
        n_r = self.values.shape[0] - 1
        n_theta = self.values.shape[1]
        if n_r < 8 or n_theta < 16 or n_theta % 2 != 0:
            raise ValueError("need n_r >= 8 and even n_theta >= 16")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("map values must be finite")
        self.h_target = float(self.h_target)

    @property
    def n_r(self):
        return self.values.shape[0] - 1

    @property
    def n_theta(self):
        return self.values.shape[1]

    @property
    def grid(self):
        return get_grid(self.n_r, self.n_theta)


@dataclass(frozen=True)
class BoundaryTrace:
    """Closed boundary polyline and the outward conormal direction at r = 1."""

    points: np.ndarray    # (n_theta, 3)
    conormal: np.ndarray  # (n_theta, 3), unit vectors
    degenerate: bool = False


def sample_map(fn, n_r, n_theta, h_target=1.0, meta=None):
    """DiskMap from a callable fn(z: complex array) -> (..., 3)."""
    grid = get_grid(n_r, n_theta)
    values = np.asarray(fn(grid.nodes_complex()), float)
    return DiskMap(values=values, h_target=h_target, meta=meta or {})


# ---------------------------------------------------------------------------
# first-order calculus and residuals
# ---------------------------------------------------------------------------

def gradient(disk_map):
    """Cartesian derivative fields (u_x, u_y) at every node, ring included."""
    return disk_map.grid.gradient(disk_map.values)


def laplacian(disk_map):
    """Geometer's Laplacian -(u_xx + u_yy) at the cell-centered nodes."""
    return disk_map.grid.laplacian(disk_map.values)


def h_residual(disk_map):
    """Pointwise H-system residual Delta u + 2 H u_x ^ u_y and its norms.

    Returns (field over the cell-centered nodes, sup norm, L2 norm).
    """
    grid = disk_map.grid
    u_x, u_y = gradient(disk_map)
    cross = np.cross(u_x, u_y)[: disk_map.n_r]
    fieldv = laplacian(disk_map) + 2.0 * disk_map.h_target * cross
    point_norm = np.linalg.norm(fieldv, axis=-1)
    sup = float(point_norm.max())
    l2 = float(np.sqrt(grid.integrate(np.concatenate(
        [point_norm**2, np.zeros((1, grid.n_theta))], axis=0))))
    return fieldv, sup, l2


def conformality_defect(disk_map):
    """(sup |<u_x, u_y>|, sup ||u_x| - |u_y||) over all nodes."""
    u_x, u_y = gradient(disk_map)
    inner = np.abs(np.sum(u_x * u_y, axis=-1))
    stretch = np.abs(np.linalg.norm(u_x, axis=-1) - np.linalg.norm(u_y, axis=-1))
    return float(inner.max()), float(stretch.max())


def dirichlet_energy(disk_map):
    """Integral of |grad u|^2 over the disk (midpoint quadrature)."""
    u_x, u_y = gradient(disk_map)
    dens = np.sum(u_x * u_x + u_y * u_y, axis=-1)
    return float(disk_map.grid.integrate(dens))


def area(disk_map):
    """Integral of |u_x ^ u_y| (area counted with multiplicity)."""
    u_x, u_y = gradient(disk_map)
    dens = np.linalg.norm(np.cross(u_x, u_y), axis=-1)
    return float(disk_map.grid.integrate(dens))


def diameter(disk_map):
    """Max pairwise distance of image samples.

    Uses every node when the grid has at most 64^2 nodes, else the stride-2
    subsample in both indices (deterministic).
    """
    pts = disk_map.values
    if pts.shape[0] * pts.shape[1] > 64 * 64:
        pts = pts[::2, ::2]
    pts = pts.reshape(-1, 3)
    best = 0.0
    chunk = 2048
    for i in range(0, len(pts), chunk):
        block = pts[i : i + chunk]
        d2 = np.sum((block[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def boundary_trace(disk_map):
    """Trace u(e^{i theta}) and the outward conormal direction at r = 1.

    The conormal is the normalized one-sided radial derivative; a trace that
    collapses to a point is flagged degenerate (conormals set to zero).
    """
    grid = disk_map.grid
    points = disk_map.values[-1].copy()
    du = grid.radial_derivative(disk_map.values, 1)[-1]
    norms = np.linalg.norm(du, axis=-1, keepdims=True)
    spread = np.linalg.norm(points - points.mean(axis=0), axis=-1).max()
    scale = 1.0 + np.abs(disk_map.values).max()
    degenerate = bool(spread < 1e-10 * scale)
    if degenerate or np.any(norms < 1e-14 * scale):
        conormal = np.zeros_like(points)
        degenerate = True
    else:
        conormal = du / norms
    return BoundaryTrace(points=points, conormal=conormal, degenerate=degenerate)


def orthogonality_defect(disk_map, domain, tol=None):
    """Free-boundary orthogonality defect max |<unit(u_x ^ u_y), N>| at r = 1.

    N is the domain's exterior normal at the projection of each boundary
    sample.  Raises BoundaryOffDomain when a boundary sample is farther than
    ``tol`` (default 1e-3 * domain diagonal) from the boundary surface.
    A degenerate trace (vanishing cross products) reports defect 0.
    """
    tol = 1e-3 * domain.diagonal if tol is None else float(tol)
    ring = disk_map.values[-1]
    feet = project_to_boundary(domain, ring)
    dist = np.linalg.norm(ring - feet, axis=-1)
    if np.any(dist > tol):
        raise BoundaryOffDomain(
            f"boundary sample is {dist.max():.3g} from the boundary (tol {tol:.3g})")
    u_x, u_y = gradient(disk_map)
    cross = np.cross(u_x[-1], u_y[-1])
    norms = np.linalg.norm(cross, axis=-1, keepdims=True)
    scale = (1.0 + np.abs(disk_map.values).max()) ** 2
    live = norms[:, 0] > 1e-14 * scale
    if not np.any(live):
        return 0.0
    unit_cross = np.where(live[:, None], cross / np.where(live[:, None], norms, 1.0), 0.0)
    normals = boundary_normal(domain, feet)
    return float(np.abs(np.sum(unit_cross * normals, axis=-1)).max())


# ---------------------------------------------------------------------------
# boundary straightening and reflection extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Straightening:
    """Local diffeomorphism flattening the boundary near a base point.

    forward(p) = (tangent coordinates of the foot point, signed distance
    along the exterior normal); the boundary maps into {third coord = 0}.
    """

    domain: object
    base_point: np.ndarray
    normal: np.ndarray
    basis: np.ndarray        # (2, 3)
    chart_radius: float

    def forward(self, p):
        p = np.asarray(p, float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        feet = project_to_boundary(self.domain, pts)
        dist = np.linalg.norm(pts - feet, axis=-1)
        sign = np.sign(self.domain.phi(pts))
        s = (feet - self.base_point) @ self.basis.T
        out = np.concatenate([s, (sign * dist)[:, None]], axis=1)
        return out[0] if single else out

    def inverse(self, s):
        s = np.asarray(s, float)
        single = s.ndim == 1
        coords = np.atleast_2d(s)
        base = self.base_point + coords[:, 0:1] * self.basis[0] + coords[:, 1:2] * self.basis[1]
        eta = np.zeros(len(coords))
        for _ in range(60):
            y = base + eta[:, None] * self.normal
            f = self.domain.phi(y)
            df = self.domain.grad_phi(y) @ self.normal
            if np.all(np.abs(f) < 1e-14 * (1.0 + np.abs(df)) * self.domain.diagonal):
                break
            eta = eta - f / df
        y = base + eta[:, None] * self.normal
        out = y + coords[:, 2:3] * boundary_normal(self.domain, y)
        return out[0] if single else out


def straighten(domain, q, chart_radius=None):
    """Straightening chart at boundary point q (see Straightening).

    The admissible chart radius is limited by the local tubular-neighborhood
    estimate 0.5 / max principal curvature; asking for more raises
    ChartTooLarge.
    """
    q = np.asarray(q, float)
    n = boundary_normal(domain, q)
    basis = tangent_basis(n)
    S, _ = shape_operator(domain, q)
    kappa = float(np.abs(np.linalg.eigvalsh(S)).max())
    bound = 0.5 / max(kappa, 1e-12)
    if chart_radius is None:
        chart_radius = bound
    elif chart_radius > bound:
        raise ChartTooLarge(
            f"chart radius {chart_radius:.3g} exceeds tubular bound {bound:.3g}")
    return Straightening(domain=domain, base_point=q, normal=n, basis=basis,
                         chart_radius=float(chart_radius))


@dataclass
class ExtendedMap:
    """Sphere-parametrized map on the doubled grid after reflection.

    Radii run from the innermost cell center through the ring at 1 to the
    inverted radii 1/r_j; the plane plus the point at infinity is identified
    with the sphere.  Mismatch statistics quantify how far the input was
    from an exactly reflectable (orthogonal, on-boundary) configuration.
    """

    radii: np.ndarray              # (2 n_r + 1,)
    values: np.ndarray             # (2 n_r + 1, n_theta, 3)
    n_theta: int
    value_mismatch: float
    derivative_mismatch: float

    def total_energy(self):
        """Dirichlet energy over the doubled grid.

        Two-chart evaluation on the Riemann sphere: the region |z| > 1 is
        pulled back through zeta = 1/conj(z) onto the disk grid, where the
        Dirichlet integrand is conformally invariant; both charts then use
        the standard grid operators and midpoint quadrature.
        """
        n_r = (len(self.radii) - 1) // 2
        grid = get_grid(n_r, self.n_theta)

        def chart_energy(values):
            u_x, u_y = grid.gradient(values)
            return float(grid.integrate(np.sum(u_x**2 + u_y**2, axis=-1)))

        inner = self.values[: n_r + 1]
        ring_reflected = self.values[n_r : n_r + 1].copy()
        ring_reflected[..., 2] *= -1.0
        outer_chart = self.values[n_r + 1 :][::-1]  # radius 1/r_j -> chart radius r_j
        outer_chart = np.concatenate([outer_chart, ring_reflected], axis=0)
        return chart_energy(inner) + chart_energy(outer_chart)


def reflect_extend(disk_map, straightening, boundary_tol=None):
    """Extend psi o u across the boundary ring by w(z) = s(w(1/conj(z))).

    s is the reflection through {third coordinate = 0}.  The boundary trace
    must lie on the container boundary within ``boundary_tol`` (default
    1e-3 * domain diagonal) or BoundaryOffDomain is raised; value and
    first-derivative mismatches across |z| = 1 are reported, not raised.
    """
    domain = straightening.domain
    tol = 1e-3 * domain.diagonal if boundary_tol is None else float(boundary_tol)
    ring = disk_map.values[-1]
    feet = project_to_boundary(domain, ring)
    dist = np.linalg.norm(ring - feet, axis=-1)
    if np.any(dist > tol):
        raise BoundaryOffDomain(
            f"boundary sample is {dist.max():.3g} from the boundary (tol {tol:.3g})")
    grid = disk_map.grid
    flat = straightening.forward(disk_map.values.reshape(-1, 3)).reshape(disk_map.values.shape)
    s_flat = flat.copy()
    s_flat[..., 2] *= -1.0
    value_mismatch = float(2.0 * np.abs(flat[-1, :, 2]).max())
    inner_deriv = grid.radial_derivative(flat, 1)[-1]
    # outer radial derivative at the ring: d/drho s(w(1/rho))|_1 = -s(w_r)
    outer_deriv = -inner_deriv.copy()
    outer_deriv[:, 2] *= -1.0
    derivative_mismatch = float(np.linalg.norm(inner_deriv - outer_deriv, axis=-1).max())
    radii = np.concatenate([grid.r, 1.0 / grid.r[:-1][::-1]])
    outer_values = s_flat[:-1][::-1]
    values = np.concatenate([flat, outer_values], axis=0)
    return ExtendedMap(radii=radii, values=values, n_theta=disk_map.n_theta,
                       value_mismatch=value_mismatch,
                       derivative_mismatch=derivative_mismatch)


# ---------------------------------------------------------------------------
# DMAP file format
# ---------------------------------------------------------------------------

def write_dmap(path, disk_map):
    header = f"DMAP 1 {disk_map.n_r} {disk_map.n_theta} {disk_map.h_target!r}\n"
    payload = disk_map.values.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def read_dmap(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError("DMAP header line missing")
    try:
        tokens = raw[:newline].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError("DMAP header is not ASCII") from exc
    if len(tokens) != 5 or tokens[0] != "DMAP" or tokens[1] != "1":
        raise FormatError(f"bad DMAP header {tokens!r}")
    try:
        n_r, n_theta = int(tokens[2]), int(tokens[3])
        h_target = float(tokens[4])
    except ValueError as exc:
        raise FormatError(f"bad DMAP header numbers: {exc}") from exc
    body = raw[newline + 1 :]
    expected = (n_r + 1) * n_theta * 3 * 8
    if len(body) != expected:
        raise FormatError(f"DMAP payload has {len(body)} bytes, expected {expected}")
    values = np.frombuffer(body, dtype="<f8").reshape(n_r + 1, n_theta, 3).copy()
    return DiskMap(values=values, h_target=h_target)
