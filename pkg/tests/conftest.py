import numpy as np
import pytest

from degenfem.assembly import Coefficients, DofMap
from degenfem.mesh import generate_unit_square
from degenfem.study import MU0

acceptance_key = pytest.StashKey[list]()

DEFAULT_CONDUCTOR = (0.25, 0.25, 0.75, 0.75)


def pytest_configure(config):
    config.stash[acceptance_key] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    """Callable recording one PASS/FAIL line per criterion for the terminal summary."""
    lines = request.config.stash[acceptance_key]

    def log(number, ok, detail):
        lines.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(lines[-1])
        return ok

    return log


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def eddy_coeffs():
    return Coefficients.uniform(MU0, 1e6)


@pytest.fixture
def mesh8():
    return generate_unit_square(8, DEFAULT_CONDUCTOR)


@pytest.fixture
def dof8(mesh8):
    return DofMap.from_mesh(mesh8)
