import numpy as np
import pytest

from pfspbb.instance import Instance


@pytest.fixture
def tiny():
    """Two jobs, two machines: order (0, 1) gives 7, order (1, 0) gives 9."""
    return Instance(np.array([[2, 3], [4, 1]]), label="tiny")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


from helpers import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
