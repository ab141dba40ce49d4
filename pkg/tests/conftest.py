import pytest
from hypothesis import HealthCheck, settings

from driftsched import PowerLevels, UserSpec

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def levels():
    return PowerLevels(1.0, 2.0)


@pytest.fixture
def tradeoff_specs():
    """Two-user setup: tight-budget deadline user + one throughput user."""
    return (
        UserSpec.deadline(1, arrival_prob=0.5, deadline_m=10, gamma=0.7, good_prob=0.4),
        UserSpec.throughput(2, delta=0.4, gamma=0.65, good_prob=0.4),
    )
