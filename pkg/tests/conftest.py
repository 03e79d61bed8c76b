import numpy as np
import pytest

from porodelay import PhysicalParams, build_grid
from porodelay.scenario import default_scenario


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def small_grid():
    return build_grid(40, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def linear_scenario():
    return default_scenario(**{"forcing.kind": "zero"})


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(results[name])
