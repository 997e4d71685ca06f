import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamdiar.array import DirectionGrid, default_geometry
from beamdiar.fsb import design_bank, design_frequencies

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def uca():
    return default_geometry()


@pytest.fixture(scope="session")
def bank36(uca):
    """Default-style bank on a 36-direction grid (10 degree steps)."""
    return design_bank(uca, DirectionGrid(36), design_frequencies(), order=128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with ``(passed, detail)``."""
    name = request.node.name.removeprefix("test_")

    def record(passed, detail=""):
        line = f"ACCEPTANCE {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
