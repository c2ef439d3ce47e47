import numpy as np
import pytest

from makeuplab.schedule import DEFAULT_SCHEDULE, build_schedule


@pytest.fixture(scope="session")
def schedule():
    return DEFAULT_SCHEDULE


@pytest.fixture(scope="session")
def sl_schedule():
    # sqrt-spaced betas; flatter early signal curve than the linear default
    return build_schedule(1000, 1e-4, 0.02, "scaled_linear")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
