import numpy as np
import pytest

from jadd.sysconfig import SPEED_OF_LIGHT, SystemConfig

UL_HALF_WAVE = SPEED_OF_LIGHT / (2 * 1.92e9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table_cfg():
    return SystemConfig()


@pytest.fixture
def small_cfg():
    return SystemConfig(N_v=2, N_h=4, P_t=2, N_f=8)


@pytest.fixture
def fine_cfg():
    # Every vertical bin maps to a physical angle at this spacing.
    return SystemConfig(N_v=4, N_h=4, P_t=1, l_v=UL_HALF_WAVE, l_h=UL_HALF_WAVE, N_f=16)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
