import math

import numpy as np
import pytest

from curved_nbody import BodySystem, REProblem, RotationSpec

R2 = 1 / math.sqrt(2)
TWO_BODY_Q = np.array([[R2, 0.0, R2], [-R2, 0.0, R2]])

_acceptance_lines = []


@pytest.fixture
def two_body_config():
    return BodySystem([1.0, 1.0], TWO_BODY_Q, 1)


@pytest.fixture
def two_body_problem():
    return REProblem((1.0, 1.0), RotationSpec((math.sqrt(2),), 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
