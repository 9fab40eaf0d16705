import numpy as np
import pytest

from transport_maps.base import ParamDomain


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def box2():
    return ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
