import numpy as np
import pytest

from helpers import CRITERIA_LINES, small_params


@pytest.fixture
def small():
    return small_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
