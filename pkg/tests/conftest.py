import numpy as np
import pytest

from hydropde.grid import Grid
from hydropde.stokes import StokesOperator


@pytest.fixture(scope="session")
def grid16():
    return Grid(16, 16, 8)


@pytest.fixture(scope="session")
def op16(grid16):
    return StokesOperator(grid16)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
