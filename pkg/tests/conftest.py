import numpy as np
import pytest

from idbs import posterior

ALPHAS = (0.9, 0.95, 0.97, 0.99)


@pytest.fixture(scope="session")
def tables():
    """Default runtime tables (x_max 4096, 1024 points), built once and cached on disk."""
    return {a: posterior.get_table(a, 4096.0, 1024) for a in ALPHAS}


@pytest.fixture(scope="session")
def table97(tables):
    return tables[0.97]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if not test_acceptance.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(test_acceptance.REPORT):
        terminalreporter.write_line(test_acceptance.REPORT[k])
