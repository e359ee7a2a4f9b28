import numpy as np
import pytest

from cqnls import spectral


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid3():
    return spectral.make_grid(3, 16, 16.0)


@pytest.fixture(scope="session")
def grid1():
    return spectral.make_grid(1, 64, 32.0)


# one line per acceptance criterion, filled by tests/test_acceptance.py
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
