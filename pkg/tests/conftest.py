import sys

import numpy as np
import pytest

from kappaform import AngularQuadrature, RadialGrid


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def fine_grid():
    return RadialGrid(4096)


@pytest.fixture(scope="session")
def quad4():
    return AngularQuadrature.for_degree(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
