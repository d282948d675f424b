import math

import numpy as np
import pytest

from wgfeedback.network import AtomSpec, NetworkSpec, uniform_network

OMEGA_A = 50.0
Z40 = 40 * math.pi / OMEGA_A


@pytest.fixture
def single_atom():
    return uniform_network(1, Z40, [0.5], OMEGA_A)


@pytest.fixture
def four_atoms():
    return uniform_network(4, Z40, [0.3, 0.3, 0.3, 0.3], OMEGA_A)


@pytest.fixture
def chiral_pair():
    return NetworkSpec((AtomSpec(Z40, 0.4, 0.3, OMEGA_A), AtomSpec(48 * math.pi / OMEGA_A, 0.3, 0.2, OMEGA_A)))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
