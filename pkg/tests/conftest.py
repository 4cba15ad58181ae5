import os

os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

import numpy as np
import pytest

from rvml.kernel import MomentumGrid
from rvml.maxwell import Torus
from rvml.phase import PhaseSpace


@pytest.fixture(scope="session")
def coarse_grid():
    g = MomentumGrid(p_max=6.0, n=13)
    g.sigma
    return g


@pytest.fixture(scope="session")
def medium_grid():
    g = MomentumGrid(p_max=6.0, n=17)
    g.sigma
    return g


@pytest.fixture(scope="session")
def slab_space(coarse_grid):
    return PhaseSpace(Torus((1, 1, 8), (1.0, 1.0, 2 * np.pi)), coarse_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for m in list(sys.modules.values())
                if getattr(m, "__file__", "") and m.__file__.endswith("test_acceptance.py")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
