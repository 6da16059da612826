"""Polar-grid calculus on the unit disk.

The grid is shared by every field-valued module: cell-centered radii
r_j = (j + 1/2)/n_r for j = 0..n_r-1, an extra node ring at r = 1, and
uniform angles theta_k = 2*pi*k/n_theta taken periodically.  The
cell-centered layout avoids the coordinate singularity at the origin;
radial stencils at the innermost ring reach across the origin to the
antipodal column (n_theta must be even).  Radial derivatives use compact
finite-difference stencils (one-sided at the r-extremes); the periodic
direction is differentiated spectrally, which makes linear maps and
harmonic polynomials exact.

Sign convention: `laplacian` returns the geometer's Laplacian
Delta = -(d^2/dx^2 + d^2/dy^2).
"""

import numpy as np
import scipy.sparse as sp


def fd_weights(x, x0, m):
    """Finite-difference weights for the m-th derivative at x0 on nodes ``x``.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


class PolarGrid:
    """Cell-centered polar grid with a boundary ring and periodic angle.

    Node layout for sampled fields: array shape (n_r + 1, n_theta, ...) with
    rows 0..n_r-1 at radii (j + 1/2)/n_r and row n_r at r = 1.
    """

    def __init__(self, n_r, n_theta):
        if n_theta % 2 != 0 or n_theta < 16:
            raise ValueError("n_theta must be even and >= 16")
        if n_r < 8:
            raise ValueError("n_r must be >= 8")
        self.n_r = int(n_r)
        self.n_theta = int(n_theta)
        self.dr = 1.0 / n_r
        self.dtheta = 2.0 * np.pi / n_theta
        self.r = np.concatenate([(np.arange(n_r) + 0.5) * self.dr, [1.0]])
        self.theta = np.arange(n_theta) * self.dtheta
        # midpoint cell measure r*dr*dtheta; the ring carries no area cell
        w = np.zeros(n_r + 1)
        w[:n_r] = self.r[:n_r] * self.dr * self.dtheta
        self.area_weights = np.broadcast_to(w[:, None], (n_r + 1, n_theta))
        self._d1, self._d2 = self._radial_operators()

    # -- radial stencils -------------------------------------------------

    def _radial_operators(self):
        """Sparse d/dr and d2/dr2 acting on the extended radial axis.

        The extended axis prepends the across-origin ghost node at -dr/2,
        so operators map (n_r + 2) rows to (n_r + 1) rows.  Four-node
        Fornberg stencils (one-sided at the r-extremes) keep first
        derivatives O(h^3); that is what makes the u_r/r term of the polar
        Laplacian uniformly second order down to the innermost ring.
        """
        n = self.n_r
        rext = np.concatenate([[-0.5 * self.dr], self.r])
        rows1, cols1, vals1 = [], [], []
        rows2, cols2, vals2 = [], [], []
        for j in range(n + 1):
            je = j + 1  # index in extended axis
            start = min(max(je - 1, 0), n - 2)
            idx = [start, start + 1, start + 2, start + 3]
            nodes = rext[idx]
            x0 = rext[je]
            w1 = fd_weights(nodes, x0, 1)
            w2 = fd_weights(nodes, x0, 2)
            rows1 += [j] * len(idx)
            cols1 += idx
            vals1 += list(w1)
            rows2 += [j] * len(idx)
            cols2 += idx
            vals2 += list(w2)
        shape = (n + 1, n + 2)
        d1 = sp.csr_matrix((vals1, (rows1, cols1)), shape=shape)
        d2 = sp.csr_matrix((vals2, (rows2, cols2)), shape=shape)
        return d1, d2

    def _extend(self, values):
        """Prepend the across-origin ghost row (antipodal column of row 0)."""
        ghost = np.roll(values[0:1], self.n_theta // 2, axis=1)
        return np.concatenate([ghost, values], axis=0)

    def _apply_radial(self, op, values):
        ext = self._extend(values)
        flat = ext.reshape(ext.shape[0], -1)
        out = op @ flat
        return out.reshape((self.n_r + 1,) + values.shape[1:])

    # -- differential operators ------------------------------------------

    def radial_derivative(self, values, order=1):
        return self._apply_radial(self._d1 if order == 1 else self._d2, values)

    def _theta_spectral(self, values, order):
        # spectral differentiation on the periodic direction: exact for
        # trigonometric polynomials, so linear/harmonic test maps come out
        # to machine precision
        spec = np.fft.rfft(values, axis=1)
        k = np.arange(spec.shape[1])
        shape = (1, -1) + (1,) * (values.ndim - 2)
        spec = spec * (1j * k.reshape(shape)) ** order
        if order % 2 == 1 and self.n_theta % 2 == 0:
            spec[:, -1] = 0.0  # Nyquist mode has no well-defined odd derivative
        return np.fft.irfft(spec, n=self.n_theta, axis=1)

    def theta_derivative(self, values):
        return self._theta_spectral(values, 1)

    def theta_second(self, values):
        return self._theta_spectral(values, 2)

    def gradient(self, values):
        """Cartesian derivatives (u_x, u_y) at every node, ring included."""
        u_r = self.radial_derivative(values, 1)
        u_t = self.theta_derivative(values)
        shape_extra = (1,) * (values.ndim - 2)
        r = self.r.reshape((-1, 1) + shape_extra)
        cos = np.cos(self.theta).reshape((1, -1) + shape_extra)
        sin = np.sin(self.theta).reshape((1, -1) + shape_extra)
        u_x = cos * u_r - sin * u_t / r
        u_y = sin * u_r + cos * u_t / r
        return u_x, u_y

    def laplacian(self, values):
        """Geometer's Laplacian -(u_xx + u_yy) at the cell-centered nodes.

        Returns shape (n_r, n_theta, ...): the boundary ring is a one-sided
        node layer and carries no Laplacian value.
        """
        u_rr = self.radial_derivative(values, 2)[: self.n_r]
        u_r = self.radial_derivative(values, 1)[: self.n_r]
        u_tt = self.theta_second(values)[: self.n_r]
        shape_extra = (1,) * (values.ndim - 2)
        r = self.r[: self.n_r].reshape((-1, 1) + shape_extra)
        return -(u_rr + u_r / r + u_tt / r**2)

    # -- quadrature -------------------------------------------------------

    def integrate(self, field):
        """Midpoint-rule integral over the disk of a nodal field.

        ``field`` may have trailing component axes; the ring row is ignored
        (its cell measure is zero).
        """
        w = self.area_weights.reshape(self.area_weights.shape + (1,) * (field.ndim - 2))
        return np.sum(field * w, axis=(0, 1))

    def nodes_complex(self):
        """Node positions z = r*exp(i*theta), shape (n_r + 1, n_theta)."""
        return self.r[:, None] * np.exp(1j * self.theta[None, :])


_GRID_CACHE = {}


def get_grid(n_r, n_theta):
    """Shared PolarGrid instances keyed by size (operators are reused)."""
    key = (int(n_r), int(n_theta))
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = PolarGrid(*key)
    return _GRID_CACHE[key]
