import numpy as np
import pytest

from snowflake_embed.metric import from_points, validate_metric

CYCLE4 = [[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]]


def grid_points(side):
    return np.array([(i, j) for i in range(side) for j in range(side)], dtype=float)


def path_matrix(n):
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]).astype(float)


@pytest.fixture
def cycle4():
    return validate_metric(CYCLE4)


@pytest.fixture
def grid8():
    return from_points(grid_points(8))


@pytest.fixture(scope="session")
def random50():
    """50 uniform points in the unit square: a doubling instance with uneven spacing."""
    rng = np.random.default_rng(2024)
    return from_points(rng.random((50, 2)))


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
