import numpy as np
import pytest

from cmclab import bubbles as bub
from cmclab import implicit_domains as dom


def make_half_space():
    """Domain {z < 0} with flat boundary plane z = 0."""
    return dom.ImplicitDomain(
        phi=lambda p: np.asarray(p, float)[..., 2],
        grad_phi=lambda p: np.broadcast_to(np.array([0.0, 0.0, 1.0]),
                                           np.asarray(p).shape).copy(),
        hess_phi=lambda p: np.zeros(np.asarray(p).shape + (3,)),
        bounding_box=np.array([[-2.0, -2.0, -2.0], [2.0, 2.0, 2.0]]),
        name="half-space",
    )


def planted_pair_map(noise_amp, n, seed=1, sphere_scale=0.05, hemi_scale=0.1):
    """Sphere bubble at the origin over a hemisphere at the boundary point 1."""
    sphere = bub.sphere_bubble(center=0.0, scale=sphere_scale)
    hemi = bub.bubble_from_dict({"preset": "hemisphere", "boundary_angle": 0.0,
                                 "scale": hemi_scale})
    seq = bub.SyntheticSequence(bubbles=(sphere, hemi), noise_amp=noise_amp, seed=seed)
    return bub.synth_sequence(seq, eps=1.0, n_r=n, n_theta=n)


def fitted_slope(errors):
    """Mean convergence order across successive grid doublings."""
    errors = np.asarray(errors, float)
    return float(np.log2(errors[0] / errors[-1]) / (len(errors) - 1))


@pytest.fixture(scope="session")
def half_space():
    return make_half_space()


@pytest.fixture(scope="session")
def unit_ball():
    return dom.ball(1.0)


@pytest.fixture(scope="session")
def ellipsoid_211():
    return dom.ellipsoid(2.0, 1.5, 1.0)
