import numpy as np
import pytest

from saddlelab.endo import family_Ftheta, squaring_map


@pytest.fixture(scope="session")
def F():
    return family_Ftheta(0.01)


@pytest.fixture(scope="session")
def SQ():
    return squaring_map(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, n):
    P = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    return P / np.max(np.abs(P), axis=1, keepdims=True)
