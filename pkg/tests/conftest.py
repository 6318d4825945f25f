import numpy as np
import pytest

from qbounce.basis import build_basis


@pytest.fixture(scope="session")
def basis20():
    return build_basis(20)


@pytest.fixture(scope="session")
def basis50():
    return build_basis(50)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)
