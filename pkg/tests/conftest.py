import numpy as np
import pytest

from emsphere.geometry import round_reference
from emsphere.grid import build_grid


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64)


@pytest.fixture(scope="session")
def grid48():
    return build_grid(48)


@pytest.fixture(scope="session")
def round64(grid64):
    return round_reference(grid64)


@pytest.fixture(scope="session")
def round48(grid48):
    return round_reference(grid48)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
