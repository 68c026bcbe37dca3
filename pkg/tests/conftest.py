import numpy as np
import pytest

from rpesim.grid import GridSpec, PotentialSpec, assemble_hamiltonian
from rpesim.spectral import eigendecompose


@pytest.fixture
def quad_pot():
    return PotentialSpec("separable-quadratic", {"coef": 8.0})


@pytest.fixture
def ham7(quad_pot):
    return assemble_hamiltonian(GridSpec(1, 7), quad_pot, 1.0)


@pytest.fixture
def spec7(ham7):
    return eigendecompose(ham7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# acceptance lines, echoed at the end of the session so they survive capture
ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
