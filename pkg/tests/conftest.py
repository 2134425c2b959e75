import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparseoc.grid import Grid  # noqa: E402
from sparseoc.harness import RunConfig, build_example  # noqa: E402
from sparseoc.penalty import PenaltyParams  # noqa: E402
from sparseoc.problem import ControlProblem  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def example1():
    return build_example(RunConfig(example="example1", n=31))


@pytest.fixture
def small_problem(rng):
    """n = 8 problem with a nonzero source and random target."""
    g = Grid(8)
    y_d = rng.standard_normal(g.size)
    f = 5.0 * rng.standard_normal(g.size)
    return ControlProblem(g, y_d, PenaltyParams(p=2, gamma=50.0, alpha=0.3, beta=0.05), f=f)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
