import numpy as np
import pytest

from szinterp.mesh import build_mesh, interval, interval_from_points, square

# the irregular 7-element partition used throughout
IRREGULAR_POINTS = [0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 0.92, 1.0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def irregular_1d():
    return interval_from_points(IRREGULAR_POINTS)


@pytest.fixture
def square8():
    """Unit square cut into 8 triangles."""
    return square(2)


@pytest.fixture
def square32():
    return square(4)


@pytest.fixture
def unit_interval_2():
    return interval(2)


@pytest.fixture
def two_triangles():
    return build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])


# one summary line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
