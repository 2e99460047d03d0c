import numpy as np
import pytest

from newtonian_lab.space import from_points, generate_space


@pytest.fixture
def line3():
    """Three collinear unit-weight points at 0, 0.6, 1.2."""
    return from_points(np.array([0.0, 0.6, 1.2]))


@pytest.fixture
def u_line3():
    return np.array([0.0, 0.6, 1.2])


@pytest.fixture(scope="session")
def grid256():
    return generate_space("grid1d", n=256)


# one summary line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
