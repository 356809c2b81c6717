import pytest

from sads_dirac import SpacetimeParams
from sads_dirac.quasimodes import build_quasimode, restricted_grid

SWEEP_H = (0.2, 0.15, 0.1, 0.08, 0.06)


@pytest.fixture(scope="session")
def unit_bh():
    """M = 1, l = 1: horizon at r = 1."""
    return SpacetimeParams(1.0, 1.0, 2.0, 0.1)


@pytest.fixture(scope="session")
def work():
    """Working parameters of the quasimode experiments."""
    return SpacetimeParams(0.05, 1.0, 2.0, 0.1)


@pytest.fixture(scope="session")
def quasimode_h01(work):
    return build_quasimode(work, restricted_grid(work, 4000))


@pytest.fixture(scope="session")
def sweep_default(work):
    from sads_dirac.quasimodes import residual_sweep
    return residual_sweep(list(SWEEP_H), work)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
