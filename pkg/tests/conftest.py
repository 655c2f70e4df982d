import sys
import numpy as np
import pytest

from countcurv.complex import build_complex
from countcurv.lattice import LatticeSpec, generate_l1_lattice


def grid_lists(n):
    """Adjacency lists of an ``n x n`` 4-neighbour grid, row-major ids."""
    out = []
    for i in range(n):
        for j in range(n):
            nb = []
            if i > 0:
                nb.append((i - 1) * n + j)
            if i < n - 1:
                nb.append((i + 1) * n + j)
            if j > 0:
                nb.append(i * n + j - 1)
            if j < n - 1:
                nb.append(i * n + j + 1)
            out.append(nb)
    return out


@pytest.fixture(scope="session")
def z2():
    spec = LatticeSpec(2, 10)
    return spec, generate_l1_lattice(spec)


@pytest.fixture(scope="session")
def z3():
    spec = LatticeSpec(3, 5)
    return spec, generate_l1_lattice(spec)


@pytest.fixture
def grid3():
    return build_complex(grid_lists(3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria 1-9")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.pytest_terminal_summary_lines():
        terminalreporter.write_line(line)
