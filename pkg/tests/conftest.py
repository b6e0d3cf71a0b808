import numpy as np
import pytest
from hypothesis import settings

from spinarrival.core import PhysicalParams
from spinarrival.waveguide import LongitudinalGrid, PacketConfig, init_packet

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def params():
    return PhysicalParams(omega=8.0)


@pytest.fixture(scope="session")
def grid():
    return LongitudinalGrid(80.0, 4095)


@pytest.fixture(scope="session")
def state0(params, grid):
    return init_packet(PacketConfig(5.0, 1.0, 1.0), grid, params)
