import numpy as np
import pytest

from surfpc import experiments
from surfpc.potentials import EAMPotential


@pytest.fixture(scope="session")
def pot():
    return EAMPotential()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# The experiment runs below are shared by several test modules; each takes a
# few seconds at N = 1000 and is deterministic, so computing them once is safe.

@pytest.fixture(scope="session")
def ground_state_run(pot):
    return experiments.run_ground_state(pot=pot)


@pytest.fixture(scope="session")
def converge_run(pot):
    return experiments.run_converge_L(pot=pot)


@pytest.fixture(scope="session")
def fixed_force_run(pot):
    return experiments.run_fixed_force(pot=pot)


@pytest.fixture(scope="session")
def long_wavelength_run(pot):
    return experiments.run_long_wavelength(pot=pot)


# -- acceptance verdicts --------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {detail}")
