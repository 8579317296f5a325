import numpy as np
import pytest

from robin_insulate.mesh import make_disk_mesh, make_polygon_mesh, unit_square_polygon

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def disk3():
    return make_disk_mesh(1.0, 3)


@pytest.fixture(scope="session")
def disk4():
    return make_disk_mesh(1.0, 4)


@pytest.fixture(scope="session")
def square():
    return make_polygon_mesh(unit_square_polygon(), 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
