import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sine(x):
    return np.sin(2 * np.pi * x)


CRITERIA = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def criteria_lines(request):
    return request.config.stash.setdefault(CRITERIA, {})


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
