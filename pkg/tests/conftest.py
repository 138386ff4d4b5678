import numpy as np
import pytest
from hypothesis import settings

from varharm.grid import Grid

settings.register_profile("ci", max_examples=25, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def g1():
    return Grid(1, 8.0, 1024)


@pytest.fixture(scope="session")
def g2():
    return Grid(2, 4.0, 64)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(criterion, passed, detail)``; lines are echoed in the terminal summary."""
    return request.config.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_ACCEPTANCE_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(rows, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
