import pytest

from kfree.kfree_sets import KFreeConfig
from kfree.lattice import preset

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def z1k2():
    return KFreeConfig(preset("Z1"), 2)


@pytest.fixture(scope="session")
def z2k1():
    return KFreeConfig(preset("Z2"), 1)


@pytest.fixture(scope="session")
def z2k2():
    return KFreeConfig(preset("Z2"), 2)


@pytest.fixture(scope="session")
def a2k1():
    return KFreeConfig(preset("A2"), 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
