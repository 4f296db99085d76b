import numpy as np
import pytest

import zohpde


@pytest.fixture(scope="session")
def es64():
    """Worked-example eigensystem: p=1, q=15 growth, Dirichlet, 64 modes."""
    return zohpde.analytic_eigensystem(1.0, 15.0, n_max=64, grid_size=400)


@pytest.fixture(scope="session")
def reduced64(es64):
    return zohpde.synthesize_reduced(es64, poles=[-1.0])


@pytest.fixture(scope="session")
def backstep64():
    return zohpde.synthesize_backstepping(1.0, 15.0, c=5.0)


@pytest.fixture(scope="session")
def shoot20():
    """Shooting eigensystem of the worked example, first 20 modes."""
    problem = zohpde.SLProblem.constant_dirichlet(1.0, 15.0)
    return zohpde.shoot_eigensystem(problem, n_max=20, grid_size=400)


@pytest.fixture(scope="session")
def x0_parabola(es64):
    return 4.0 * es64.grid * (1.0 - es64.grid)


def pytest_addoption(parser):
    parser.addoption(
        "--skip-slow", action="store_true", default=False, help="skip the slowest tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-slow"):
        marker = pytest.mark.skip(reason="--skip-slow given")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(marker)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test")
