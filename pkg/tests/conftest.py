import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sctpose import tensor as T

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def f64():
    """Run the test with float64 tensors, restoring the previous dtype afterwards."""
    with T.default_dtype("float64"):
        yield
    T.clear_tape()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
