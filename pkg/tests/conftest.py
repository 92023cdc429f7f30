import numpy as np
import pytest

from fuzzytomo import optics, protocols


@pytest.fixture(scope="session")
def quartz_model():
    return optics.quartz()


@pytest.fixture(scope="session")
def arm(quartz_model):
    return protocols.make_arm(0.65, order=5, model=quartz_model)


@pytest.fixture(scope="session")
def grid20():
    return optics.spectral_grid(0.65, 0.020, 0.325, 64)


@pytest.fixture(scope="session")
def cube2():
    return protocols.build_protocol("cube", 2)


@pytest.fixture(scope="session")
def oct2():
    return protocols.build_protocol("octahedron", 2)


@pytest.fixture(scope="session")
def cube4_20nm(grid20):
    return protocols.build_protocol("cube", 4, spectral=grid20)


@pytest.fixture(scope="session")
def oct4_20nm(grid20):
    return protocols.build_protocol("octahedron", 4, spectral=grid20)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
