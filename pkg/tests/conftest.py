import numpy as np
import pytest
from hypothesis import settings

from obsbandit.model import ProblemInstance, default_instance, derive
from obsbandit.rng import Stream

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_spd(rng, d, floor=0.1):
    m = rng.standard_normal((d, d))
    return m @ m.T + floor * np.eye(d)


@pytest.fixture
def small_instance():
    return default_instance(4, 5, 3, Stream(7, (0,)))


@pytest.fixture
def small_derived(small_instance):
    return derive(small_instance)


@pytest.fixture
def skewed_instance():
    """Non-isotropic instance for checking formulas that identities would hide."""
    rng = np.random.default_rng(11)
    d_x, d_y = 4, 3
    return ProblemInstance(
        n_arms=3,
        d_x=d_x,
        d_y=d_y,
        sensing=rng.standard_normal((d_y, d_x)),
        sigma_x=random_spd(rng, d_x, 0.5),
        sigma_y=random_spd(rng, d_y, 0.3),
        mu_star=rng.standard_normal(d_x),
        gamma_r=0.7,
    )
