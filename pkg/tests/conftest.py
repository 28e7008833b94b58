import numpy as np
import pytest

from tweezer import constants as C
from tweezer.trap import TrapConfig, build_potential

import acceptance_log


@pytest.fixture(scope="session")
def cfg():
    return TrapConfig()


@pytest.fixture(scope="session")
def pot(cfg):
    return build_potential(cfg)


@pytest.fixture(scope="session")
def cfg_nog():
    return TrapConfig(gravity=0.0)


@pytest.fixture(scope="session")
def pot_nog(cfg_nog):
    return build_potential(cfg_nog)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    rows = acceptance_log.lines()
    if rows:
        terminalreporter.section("acceptance criteria")
        for row in rows:
            terminalreporter.write_line(row)
