import numpy as np
import pytest

from morphfit import make_synthetic_model


@pytest.fixture(scope="session")
def small_model():
    """Fast 60-vertex model for oracle-style tests."""
    return make_synthetic_model(7, n_vertices=60, d_id=6, d_exp=3, K=12)


@pytest.fixture(scope="session")
def std_model():
    """The benchmark-sized model used by the acceptance suite."""
    return make_synthetic_model(1, n_vertices=500, d_id=40, d_exp=10, K=68)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
