import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from exosim.model import build_robot_model

settings.register_profile("exosim", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("exosim")


@pytest.fixture(scope="session")
def model():
    return build_robot_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_q(rng, n=None, scale=np.pi):
    shape = (7,) if n is None else (n, 7)
    return rng.uniform(-scale, scale, size=shape)
