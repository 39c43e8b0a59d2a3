import numpy as np
import pytest

from etherstar import geometry


@pytest.fixture(scope="session")
def flat():
    return geometry.get_model("flat:1")


@pytest.fixture(scope="session")
def sphere():
    return geometry.get_model("sphere")


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
