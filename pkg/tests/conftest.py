import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import meshpose as mp


@pytest.fixture(scope="session")
def small_mesh():
    return mp.cuboid((1.6, 0.6, 0.9), subdivisions=3)


@pytest.fixture(scope="session")
def default_mesh():
    return mp.cuboid()


@pytest.fixture(scope="session")
def camera():
    return mp.DEFAULT_CAMERA


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
