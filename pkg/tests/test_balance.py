import numpy as np
import pytest

from cmclab import balance as bal
from cmclab import disk_maps as dm
from cmclab import implicit_domains as dom
from cmclab.errors import BoundaryMismatch

from conftest import fitted_slope


# -- flux identity -----------------------------------------------------------------

@pytest.mark.parametrize("h", [0.0, 0.5, 0.9])
def test_balancing_residual_caps(h):
    n_r, n_theta = 256, 512
    cap = bal.spherical_cap_map(h, n_r, n_theta)
    rim = np.sqrt(1 - h * h)
    disk = bal.flat_disk_map(rim, h, n_r, n_theta)
    trace = dm.boundary_trace(cap)
    res = bal.balancing_residual(trace, disk, 1.0)
    assert np.linalg.norm(res) <= 1e-5 * 2 * np.pi
    # closed-form conormal flux (0, 0, -2 pi (1 - h^2))
    seg = np.linalg.norm(np.roll(trace.points, -1, axis=0) - trace.points, axis=-1)
    ds = 0.5 * (seg + np.roll(seg, 1))
    b_int = np.sum(trace.conormal * ds[:, None], axis=0)
    assert np.abs(b_int - [0, 0, -2 * np.pi * (1 - h * h)]).max() < 1e-4


def test_split_sphere_residuals_negate():
    h = 0.3
    rim = np.sqrt(1 - h * h)
    upper = bal.spherical_cap_map(h, 128, 256)
    lower = bal.spherical_cap_map(h, 128, 256, from_south=True)
    r_up = bal.balancing_residual(dm.boundary_trace(upper),
                                  bal.flat_disk_map(rim, h, 128, 256), 1.0)
    r_lo = bal.balancing_residual(dm.boundary_trace(lower),
                                  bal.flat_disk_map(rim, h, 128, 256, mirror=True), 1.0)
    assert np.abs(r_up + r_lo).max() < 1e-6


def test_balancing_translation_invariance():
    h = 0.4
    rim = np.sqrt(1 - h * h)
    cap = bal.spherical_cap_map(h, 64, 128)
    disk = bal.flat_disk_map(rim, h, 64, 128)
    r0 = bal.balancing_residual(dm.boundary_trace(cap), disk, 1.0)
    shift = np.array([0.3, -0.2, 0.7])
    cap_t = dm.DiskMap(values=cap.values + shift, h_target=1.0)
    disk_t = dm.DiskMap(values=disk.values + shift, h_target=1.0)
    r1 = bal.balancing_residual(dm.boundary_trace(cap_t), disk_t, 1.0)
    assert np.abs(r1 - r0).max() < 1e-12


def test_balancing_boundary_mismatch():
    cap = bal.spherical_cap_map(0.5, 64, 128)
    wrong = bal.flat_disk_map(0.5, 0.5, 64, 128)  # wrong rim radius
    with pytest.raises(BoundaryMismatch):
        bal.balancing_residual(dm.boundary_trace(cap), wrong, 1.0)
    reversed_disk = bal.flat_disk_map(np.sqrt(0.75), 0.5, 64, 128, mirror=True)
    with pytest.raises(BoundaryMismatch):
        bal.balancing_residual(dm.boundary_trace(cap), reversed_disk, 1.0)


# -- first order and barycenter -------------------------------------------------------

def test_first_order_exact_limit():
    n = np.array([0.0, 0.0, 1.0])
    for l in (1, 3):
        cfg = bal.CapConfiguration(centers=np.zeros((l, 2)))
        assert np.abs(bal.first_order_term(cfg, n)).max() == 0.0


def test_first_order_perturbed_radius():
    n = np.array([0.0, 0.0, 1.0])
    e = 1e-3
    cfg = bal.CapConfiguration(centers=np.zeros((1, 2)), radii=[1 + e])
    got = bal.first_order_term(cfg, n)[2]
    exact = 2 * np.pi * (1 + e) ** 2 - 2 * np.pi * (1 + e)
    assert np.isclose(got, exact, rtol=1e-12)
    assert np.isclose(got, 2 * np.pi * e, rtol=2e-3)


def test_barycenter_degenerate_single_circle():
    c, flag = bal.weighted_barycenter([((0.25, -0.5), 1.0)], [((0.25, -0.5), 1.0)])
    assert flag
    assert np.allclose(c, [0.25, -0.5])


def test_barycenter_symmetric_perturbation():
    c, flag = bal.weighted_barycenter([((0.0, 0.0), 1.001)], [((0.0, 0.0), 1.0)])
    assert not flag
    assert np.allclose(c, [0, 0], atol=1e-12)


def test_barycenter_two_circles_matches_linear_solve():
    caps = [((-0.5, 0.0), 1.02), ((0.5, 0.0), 1.0)]
    curves = [((-0.5, 0.0), 1.0), ((0.5, 0.0), 1.0)]
    c, flag = bal.weighted_barycenter(caps, curves)
    assert not flag
    areas = np.pi * np.array([1.02**2, 1.0])
    lengths = 2 * np.pi * np.ones(2)
    centers = np.array([[-0.5, 0.0], [0.5, 0.0]])
    oracle = (2 * (areas[:, None] * centers).sum(0)
              - (lengths[:, None] * centers).sum(0)) / (2 * areas.sum() - lengths.sum())
    assert np.allclose(c, oracle, atol=1e-12)
    # shifts toward the enlarged cap
    assert c[0] < 0


# -- projected second order --------------------------------------------------------------

def test_projected_second_order_zero_jet(unit_ball):
    jet = dom.normal_jet(unit_ball, np.array([0.0, 0, 1.0]))
    zero_jet = dom.NormalJet(jet.base_point, jet.normal, jet.tangent_basis,
                             jet.d_normal, np.zeros((3, 2, 2)))
    cfg = bal.CapConfiguration(centers=np.zeros((1, 2)))
    assert np.abs(bal.projected_second_order(zero_jet, cfg)).max() == 0.0


def test_projected_second_order_moment_constant(ellipsoid_211):
    # dense-quadrature oracle of the moment constant: for constant bilinear
    # d2N the result per unit circle is -(pi/2)(B_11 + B_22), projected
    q = dom.project_to_boundary(ellipsoid_211, np.array([1.0, 1.0, 0.5]))
    jet = dom.normal_jet(ellipsoid_211, q)
    cfg = bal.CapConfiguration(centers=np.zeros((1, 2)))
    got = bal.projected_second_order(jet, cfg)
    trace = jet.d2_normal[:, 0, 0] + jet.d2_normal[:, 1, 1]
    expect = -(np.pi / 2) * trace
    expect = expect - (expect @ jet.normal) * jet.normal
    assert np.abs(got - expect).max() < 1e-6
    # additivity over identical circles and exact tangency
    cfg3 = bal.CapConfiguration(centers=np.zeros((3, 2)))
    assert np.allclose(bal.projected_second_order(jet, cfg3), 3 * got, atol=1e-12)
    assert abs(got @ jet.normal) < 1e-15


# -- Gauss-map identity --------------------------------------------------------------------

def test_gauss_map_identity_plane(half_space):
    grid_vals = bal.flat_disk_map(0.5, 0.0, 16, 32)
    patch = dm.DiskMap(values=grid_vals.values - [0, 0, 0.0], h_target=1.0)
    assert bal.gauss_map_identity_residual(patch, half_space) < 1e-12


def test_gauss_map_identity_sphere_converges():
    sphere = dom.ellipsoid(1.0, 1.0, 1.0)
    errs = []
    for n in (32, 64, 128):
        patch = bal.isothermal_spheroid_patch(1.0, 1.0, 0.9, 0.2, n_r=n, n_theta=n)
        errs.append(bal.gauss_map_identity_residual(patch, sphere))
    assert fitted_slope(errs) >= 1.9


def test_gauss_map_identity_spheroid_and_ablation():
    spheroid = dom.ellipsoid(2.0, 2.0, 1.0)
    errs, ablated = [], []
    for n in (32, 64, 128):
        patch = bal.isothermal_spheroid_patch(2.0, 1.0, 0.9, 0.2, n_r=n, n_theta=n)
        errs.append(bal.gauss_map_identity_residual(patch, spheroid))
        ablated.append(bal.gauss_map_identity_residual(patch, spheroid,
                                                       ablate_grad_term=True))
    assert fitted_slope(errs) >= 1.9
    # the grad H term is load-bearing: dropping it leaves an O(1) defect
    assert ablated[-1] >= 50 * errs[-1]
    assert ablated[-1] > 0.5 * ablated[0]


# -- reduced force ----------------------------------------------------------------------------

def test_reduced_force_ball_zero(unit_ball):
    f = bal.reduced_force(unit_ball, np.array([0.0, 0, 1.0]), 1)
    assert np.linalg.norm(f) < 1e-8


def test_reduced_force_vertex_zero(ellipsoid_211):
    f = bal.reduced_force(ellipsoid_211, np.array([2.0, 0, 0]), 1)
    assert np.linalg.norm(f) < 1e-6


def test_reduced_force_collinear_with_grad_h(ellipsoid_211):
    pts = dom.project_to_boundary(
        ellipsoid_211, dom.fibonacci_sphere(100) * np.array([2, 1.5, 1]))
    force = bal.reduced_force(ellipsoid_211, pts, 1)
    grad_h = dom.surface_grad_H(ellipsoid_211, pts)
    fn = np.linalg.norm(force, axis=-1)
    gn = np.linalg.norm(grad_h, axis=-1)
    live = np.minimum(fn, gn) > 1e-6
    cos = np.sum(force * grad_h, axis=-1)[live] / (fn[live] * gn[live])
    assert np.arccos(np.clip(cos, -1, 1)).max() < 1e-2
    # documented normalization: force = pi * l * grad H
    assert np.abs(fn[live] / (np.pi * gn[live]) - 1.0).max() < 1e-3


def test_reduced_force_linear_in_l(ellipsoid_211):
    q = dom.project_to_boundary(ellipsoid_211, np.array([1.0, 1.0, 0.5]))
    f1 = bal.reduced_force(ellipsoid_211, q, 1)
    f4 = bal.reduced_force(ellipsoid_211, q, 4)
    assert np.array_equal(f4, 4 * f1)


def test_reduced_force_tangent(ellipsoid_211):
    pts = dom.project_to_boundary(ellipsoid_211,
                                  dom.fibonacci_sphere(20) * np.array([2, 1.5, 1]))
    force = bal.reduced_force(ellipsoid_211, pts, 1)
    n = dom.boundary_normal(ellipsoid_211, pts)
    assert np.abs(np.sum(force * n, axis=-1)).max() < 1e-10


def test_reduced_force_is_pi_grad_h_on_builtin_domains(ellipsoid_211):
    # force = pi * l * grad H pointwise, so the zero sets coincide on every
    # built-in domain (100 mesh points each)
    domains = [dom.ball(1.3), ellipsoid_211, dom.bumpy_ball(1.0, 0.05)]
    for d in domains:
        box = d.bounding_box
        seeds = (0.5 * (box[0] + box[1])
                 + 0.5 * np.max(box[1] - box[0]) * dom.fibonacci_sphere(100))
        pts = dom.project_to_boundary(d, seeds)
        force = bal.reduced_force(d, pts, 1)
        grad_h = dom.surface_grad_H(d, pts)
        err = np.linalg.norm(force - np.pi * grad_h, axis=-1)
        scale = 1.0 + np.pi * np.linalg.norm(grad_h, axis=-1)
        assert (err / scale).max() < 1e-4


def test_reduced_force_zero_set_matches_grad_h(ellipsoid_211):
    zeros = bal.reduced_force_zeros(ellipsoid_211, l=1, n_seeds=48, tol=1e-6)
    assert len(zeros) == 6
    expect = [[2, 0, 0], [-2, 0, 0], [0, 1.5, 0], [0, -1.5, 0], [0, 0, 1], [0, 0, -1]]
    for e in expect:
        assert min(np.linalg.norm(z - np.array(e, float)) for z in zeros) < 1e-4


def test_balance_report_fields(unit_ball):
    rep = bal.balance_report(unit_ball, np.array([0.0, 0, 1.0]), l=1)
    assert np.abs(rep.boundary_integral - [0, 0, -2 * np.pi]).max() < 1e-3
    assert np.abs(rep.cap_integral - rep.boundary_integral).max() < 1e-3
    assert np.abs(rep.first_order).max() == 0.0
    assert rep.barycenter_degenerate
    # invariant: the reduced force is tangent at the base point
    assert abs(rep.reduced_force @ np.array([0, 0, 1.0])) < 1e-10
