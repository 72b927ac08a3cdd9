import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from covsteer.model import GaussianState, LinearSystem, SteeringProblem, TimeGrid
from helpers import EX1_A, EX1_B, EX1_B1, EX1_SIGMA, EX2_A, EX2_B, EX2_B1

settings.register_profile(
    "ci", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture
def ex1():
    return LinearSystem(EX1_A, EX1_B, EX1_B1)


@pytest.fixture
def ex2():
    return LinearSystem(EX2_A, EX2_B, EX2_B1)


@pytest.fixture
def ex1_transient(ex1):
    return SteeringProblem(
        ex1,
        GaussianState.centered(2 * np.eye(2)),
        GaussianState.centered(EX1_SIGMA),
        TimeGrid.horizon(1.0, 100),
    )


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
