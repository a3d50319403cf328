import numpy as np
import pytest

from vlsrate.graph_core import generate_family
from vlsrate.rank1_instance import sample_instance

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_instance(family, n, b=0.3, seed=0):
    return sample_instance(generate_family(family, n), b, seed)


@pytest.fixture
def line8():
    return make_instance("line", 8, 0.3, 1)


@pytest.fixture
def complete3():
    return make_instance("complete", 3, 0.3, 7)
