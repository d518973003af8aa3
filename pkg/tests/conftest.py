import random

import pytest
from hypothesis import HealthCheck, settings

from pvpir.protocol import SchemeId, keygen

settings.register_profile(
    "repo",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def toy_keys():
    """One toy key set per scheme, shared across the whole run."""
    rng = random.Random(0xC0FFEE)
    return {scheme: keygen(scheme, 16, rng) for scheme in SchemeId}
