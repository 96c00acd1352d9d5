import sys

import numpy as np
import pytest

from colombeau.domains import DomainSpec, SpaceTimeGrid
from colombeau.nets import EpsilonGrid, NetGrids, OrderGrid


@pytest.fixture
def grids():
    return NetGrids()


@pytest.fixture
def domain():
    return DomainSpec()


@pytest.fixture
def small_grids():
    """Three orders, six eps values: enough for fits, cheap to solve."""
    return NetGrids(OrderGrid((0, 1, 2)), EpsilonGrid.geometric(2.0 ** -3, 2.0 ** -8, 6, 4))


@pytest.fixture
def small_spacetime():
    return SpaceTimeGrid(DomainSpec(0.0, 1.0, 101), 0.05, 21)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
