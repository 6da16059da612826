import numpy as np
import pytest

from cmclab import bubbles as bub
from cmclab import disk_maps as dm
from cmclab.errors import PoleInput, ReducibleFraction

from conftest import fitted_slope


# -- stereographic projection --------------------------------------------------

def test_inv_stereographic_north_pole_values():
    assert np.allclose(bub.inv_stereographic(0.0), [0, 0, -1])
    # standard formula (2 Re z, 2 Im z, |z|^2 - 1)/(1 + |z|^2) at z = 1
    assert np.allclose(bub.inv_stereographic(1.0), [1, 0, 0])


def test_round_trip_random_poles():
    rng = np.random.default_rng(7)
    for _ in range(20):
        pole = rng.normal(size=3)
        pole /= np.linalg.norm(pole)
        z = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        back = bub.stereographic(bub.inv_stereographic(z, pole), pole)
        assert np.abs(back - z).max() < 1e-12 * (1 + np.abs(z).max()) ** 2


def test_saturation_flag():
    pts, sat = bub.inv_stereographic(np.array([1.0, 2e8]), with_flag=True)
    assert not sat[0] and sat[1]
    assert np.allclose(pts[1], [0, 0, 1])


def test_pole_input_raises():
    with pytest.raises(PoleInput):
        bub.stereographic(np.array([0.0, 0.0, 1.0]))


# -- evaluation ------------------------------------------------------------------

def test_eval_identity_bubble():
    b = bub.sphere_bubble()
    assert np.allclose(bub.eval_bubble(b, 0.0), [0, 0, -1])
    # degree-1 rational map sends infinity to the pole
    assert np.allclose(bub.eval_bubble(b, 1e12), [0, 0, 1], atol=1e-11)


def test_eval_shifted_bubble():
    b = bub.RationalBubble(shift=(1, 2, 3))
    assert np.allclose(bub.eval_bubble(b, 0.0), [1, 2, 2])


def test_gradient_norm_examples():
    b = bub.sphere_bubble()
    assert np.isclose(bub.bubble_gradient_norm(b, 0.0), 2 * np.sqrt(2))
    small = bub.sphere_bubble(center=0.0, scale=0.01)
    assert np.isclose(bub.bubble_gradient_norm(small, 0.0), 200 * np.sqrt(2))
    assert np.isclose(bub.bubble_gradient_norm(small, 0.1),
                      2 * np.sqrt(2) / (101 * 0.01))


def test_gradient_norm_matches_finite_differences():
    b = bub.RationalBubble(p_coeffs=[0.3 + 0.2j, 1.0], q_coeffs=[1.0, -0.4j],
                           shift=(0.5, -1.0, 2.0), center=0.2 - 0.1j, scale=0.7)
    rng = np.random.default_rng(3)
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    h = 1e-6
    u_x = (bub.eval_bubble(b, z + h) - bub.eval_bubble(b, z - h)) / (2 * h)
    u_y = (bub.eval_bubble(b, z + 1j * h) - bub.eval_bubble(b, z - 1j * h)) / (2 * h)
    fd_norm = np.sqrt(np.sum(u_x**2 + u_y**2, axis=-1))
    assert np.allclose(fd_norm, bub.bubble_gradient_norm(b, z), rtol=1e-7)


# -- energy quantization ----------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_plane_energy_quantized(k):
    coeffs = np.zeros(k + 1, complex)
    coeffs[-1] = 1.0
    energy, deg = bub.bubble_energy(bub.RationalBubble(p_coeffs=coeffs, q_coeffs=[1.0]))
    assert deg == k
    assert abs(energy / (8 * np.pi * k) - 1.0) < 0.005


def test_half_plane_energy():
    energy, deg = bub.bubble_energy(bub.hemisphere_bubble())
    assert deg == 1
    assert abs(energy / (4 * np.pi) - 1.0) < 0.005


@pytest.mark.parametrize("k", [2, 3])
def test_half_plane_energy_multi_covered(k):
    # ((w + i)/(w - i))^k covers the boundary circle k times; energy 4 pi k
    p = np.polynomial.polynomial.polypow([1j, 1.0], k)
    q = np.polynomial.polynomial.polypow([-1j, 1.0], k)
    energy, deg = bub.bubble_energy(bub.RationalBubble(p_coeffs=p, q_coeffs=q,
                                                       kind="half_plane"))
    assert deg == k
    assert abs(energy / (4 * np.pi * k) - 1.0) < 0.005


def test_energy_reducible_raises():
    b = bub.RationalBubble(p_coeffs=[-1.0, 0.0, 1.0], q_coeffs=[-1.0, 1.0])
    with pytest.raises(ReducibleFraction):
        bub.bubble_energy(b)


def test_mobius_invariance_of_energy():
    base = bub.RationalBubble(p_coeffs=[0.0, 0.0, 1.0], q_coeffs=[1.0])
    e0, _ = bub.bubble_energy(base)
    for coeffs in [(1 + 0.5j, 0.3, -0.2j, 1.1), (2.0, 1.0, 1.0, 1.0), (0.0, 1.0, 1.0, 0.0)]:
        moved = bub.mobius_compose(base, coeffs)
        e1, deg = bub.bubble_energy(moved)
        assert deg == 2
        assert abs(e1 / e0 - 1.0) < 0.005


# -- simplicity -------------------------------------------------------------------

def test_is_simple_cases():
    assert bub.is_simple(bub.sphere_bubble()) == (True, False, 1)
    check = bub.is_simple(bub.RationalBubble(p_coeffs=[0, 0, 1], q_coeffs=[1]))
    assert check.simple is False and check.degree == 2
    reduced = bub.is_simple(bub.RationalBubble(p_coeffs=[-1, 0, 1], q_coeffs=[-1, 1]))
    assert reduced.simple is True and reduced.reduced is True


# -- half-plane <-> disk ------------------------------------------------------------

def test_disk_half_plane_maps():
    assert np.isclose(bub.disk_to_half_plane(0.0), 1j)
    assert np.isclose(bub.disk_to_half_plane(-1.0), 0.0)
    assert np.isclose(bub.disk_to_half_plane(1j), -1.0)
    rng = np.random.default_rng(1)
    z = rng.uniform(-0.7, 0.7, 30) + 1j * rng.uniform(-0.7, 0.7, 30)
    assert np.abs(bub.half_plane_to_disk(bub.disk_to_half_plane(z)) - z).max() < 1e-13


# -- hemisphere construction ---------------------------------------------------------

def test_hemisphere_geometry():
    hemi = bub.hemisphere_bubble(center_2d=(0.3, -0.2))
    t = np.linspace(-40, 40, 401)
    boundary = bub.eval_bubble(hemi, t)
    assert np.abs(boundary[:, 2]).max() < 1e-9
    radii = np.linalg.norm(boundary[:, :2] - np.array([0.3, -0.2]), axis=-1)
    assert np.abs(radii - 1.0).max() < 1e-6
    rng = np.random.default_rng(5)
    w = rng.normal(size=300) + 1j * np.abs(rng.normal(size=300))
    interior = bub.eval_bubble(hemi, w)
    assert interior[:, 2].min() > -1e-9


def test_hemisphere_tilt_is_rigid_rotation():
    ang = 0.37
    R = np.array([[1, 0, 0],
                  [0, np.cos(ang), -np.sin(ang)],
                  [0, np.sin(ang), np.cos(ang)]])
    hemi = bub.hemisphere_bubble()
    tilted = bub.hemisphere_bubble(tilt=R)
    z = np.linspace(-5, 5, 41) + 0.3j
    assert np.abs(bub.eval_bubble(tilted, z) - bub.eval_bubble(hemi, z) @ R.T).max() < 1e-12


def test_concentration_canonical():
    b = bub.sphere_bubble(center=0.3 + 0.1j, scale=0.07)
    a, lam = bub.concentration(b)
    assert np.isclose(a, 0.3 + 0.1j)
    assert np.isclose(lam, 0.07)
    hemi = bub.hemisphere_bubble(scale=0.25)
    a, lam = bub.concentration(hemi)
    assert np.isclose(a, 0.0)
    assert np.isclose(lam, 0.25)


def test_bubble_dict_round_trip():
    b = bub.RationalBubble(p_coeffs=[0.3 + 0.2j, 1.0], q_coeffs=[1.0, -0.4j],
                           shift=(0.5, -1.0, 2.0), center=0.2 - 0.1j, scale=0.7,
                           kind="half_plane")
    back = bub.bubble_from_dict(bub.bubble_to_dict(b))
    z = np.array([0.1 + 0.2j, -0.4j, 2.0])
    assert np.allclose(bub.eval_bubble(back, z), bub.eval_bubble(b, z), atol=1e-15)
    assert back.kind == b.kind


# -- synthetic sequences ---------------------------------------------------------------

def test_synth_single_bubble_ground_truth():
    seq = bub.SyntheticSequence(bubbles=(bub.sphere_bubble(center=0.2, scale=0.3),),
                                seed=9)
    u = bub.synth_sequence(seq, eps=0.5, n_r=32, n_theta=32)
    truth = u.meta["ground_truth"][0]
    assert truth["kind"] == "plane"
    assert np.isclose(truth["center"], 0.2)
    assert np.isclose(truth["scale"], 0.15)  # scale * eps
    # the map equals the recorded bubble exactly (noise 0)
    z = u.grid.nodes_complex()
    assert np.abs(u.values - bub.eval_bubble(truth["bubble"], z)).max() < 1e-12


def test_synth_sequence_deterministic():
    seq = bub.SyntheticSequence(bubbles=(bub.sphere_bubble(scale=0.2),),
                                noise_amp=1e-3, seed=11)
    u1 = bub.synth_sequence(seq, eps=1.0, n_r=24, n_theta=32)
    u2 = bub.synth_sequence(seq, eps=1.0, n_r=24, n_theta=32)
    assert np.array_equal(u1.values, u2.values)


def test_synth_tower_separation():
    from cmclab.extraction import separation_statistic
    eps = 0.1
    sphere = bub.sphere_bubble(center=0.0, scale=eps)   # lambda = eps^2 at parameter eps
    hemi = bub.bubble_from_dict({"preset": "hemisphere", "boundary_angle": 0.0,
                                 "scale": 1.0})          # lambda = eps
    seq = bub.SyntheticSequence(bubbles=(sphere, hemi), seed=0)
    u = bub.synth_sequence(seq, eps=eps, n_r=32, n_theta=32)
    t1, t2 = u.meta["ground_truth"]
    assert np.isclose(t1["scale"], eps**2) and np.isclose(t2["scale"], eps)
    # direct formula: the pair separates faster than 1/eps
    assert separation_statistic((t1["center"], t1["scale"]),
                                (t2["center"], t2["scale"])) > 1.0 / eps


def test_synth_noise_keeps_residual_small():
    seq = bub.SyntheticSequence(bubbles=(bub.sphere_bubble(center=0.0, scale=0.3),),
                                noise_amp=1e-3, seed=13)
    u = bub.synth_sequence(seq, eps=1.0, n_r=256, n_theta=256)
    _, sup, _ = dm.h_residual(u)
    # smooth polynomial noise: stencil response stays bounded under refinement
    assert sup <= 1e-2 + dm.h_residual(bub.synth_sequence(
        bub.SyntheticSequence(bubbles=seq.bubbles, seed=13), eps=1.0,
        n_r=256, n_theta=256))[1]


def test_epsilon_schedule_validation():
    with pytest.raises(ValueError):
        bub.SyntheticSequence(bubbles=(), epsilon_schedule=(0.1, 0.2))
    with pytest.raises(ValueError):
        bub.SyntheticSequence(bubbles=(), noise_amp=-1.0)
