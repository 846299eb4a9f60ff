import math

import numpy as np
import pytest

from opelab import fock


@pytest.fixture(scope="session")
def default_config():
    return fock.ModelConfig()


@pytest.fixture(scope="session")
def default_basis(default_config):
    return fock.build_basis(default_config)


@pytest.fixture(scope="session")
def single_mode():
    """One mode (N=0), two particles: a 3x3 problem that can be done by hand."""
    return fock.build_basis(fock.ModelConfig(N=0, n_max=2))


@pytest.fixture(scope="session")
def small_basis():
    return fock.build_basis(fock.ModelConfig(N=2, n_max=3, L=2 * math.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria append (number, passed, detail) here; printed at the end
_CRITERIA = []


@pytest.fixture(scope="session")
def criterion_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
