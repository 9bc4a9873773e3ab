import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_simplex(rng, H, size=None):
    shape = (H,) if size is None else (size, H)
    g = rng.gamma(1.0, size=shape) + 1e-3
    return g / g.sum(axis=-1, keepdims=True)
