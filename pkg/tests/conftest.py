import numpy as np
import pytest

from weighted_tomo.geometry import toy_geometry
from weighted_tomo.phantoms import make_triangle4
from weighted_tomo.projector import BlockSystem, forward_project
from weighted_tomo.weights import ramp_weights

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the full-size 256x256 wedge reproduction")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size experiment, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-size run; pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy():
    g = toy_geometry()
    system = BlockSystem.build(g)
    weights = ramp_weights(g)
    gt = make_triangle4(g)
    return g, system, weights, gt, forward_project(system, weights, gt)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
