import numpy as np
import pytest

from ehmi.payoff import PayoffParams
from ehmi.synthetic import random_encounters


@pytest.fixture(scope="session")
def table_params():
    return PayoffParams.default()


@pytest.fixture(scope="session")
def encounters():
    return random_encounters(200, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip("ab:")), s)):
        terminalreporter.write_line(line)
