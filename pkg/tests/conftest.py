import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "smw", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("smw")


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)


# One line per acceptance criterion, filled in by test_acceptance.py and echoed
# after the run so it shows up without ``-s``.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
