import numpy as np
import pytest
from hypothesis import settings

from bergman_lab.geometry import GlobalConfig, Mesh

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_mesh():
    return Mesh(GlobalConfig(k_min=-3, k_max=2, x_extent=4.0))


@pytest.fixture(scope="session")
def mesh():
    return Mesh(GlobalConfig(k_min=-4, k_max=3, x_extent=8.0))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
