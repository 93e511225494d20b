import pytest
from hypothesis import HealthCheck, settings

from laserleak.params import DEFAULT_PARAMS

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMS
