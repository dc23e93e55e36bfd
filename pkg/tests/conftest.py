import os

# single-threaded FFTs so repeated runs are bit-identical
os.environ["MOBIFLOW_THREADS"] = "1"

import numpy as np
import pytest

from mobiflow.grid import Grid

# lines printed by the acceptance suite, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid8():
    return Grid((8, 8))
