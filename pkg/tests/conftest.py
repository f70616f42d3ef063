import numpy as np
import pytest


@pytest.fixture(scope="session")
def seed():
    return 20240917


@pytest.fixture
def rng(seed):
    return np.random.default_rng(seed)


@pytest.fixture
def tiny_instance():
    """Small tracking instance with everything a desk test needs."""
    from deepcfft.bench import make_instance

    def _make(n=3, m=1, horizon=4, seed=5, **kw):
        return make_instance(n, m, horizon, seed, **kw)

    return _make
