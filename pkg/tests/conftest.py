import numpy as np
import pytest

from mblab.grid import GridSpec
from mblab.potential import make_potential
from mblab.solvers import TransitionSpec, periodic_states, solve_heteroclinic, solve_multitransition

# 2 sqrt(2) / pi: integral of sqrt(2 sin^2(pi u)) over [0, 1]
C1_PENDULUM = 2.0 * np.sqrt(2.0) / np.pi
# eps = 0.3 front energy from a scipy solve_bvp shooting oracle on [-12, 12]
C1_MODULATED = 0.8333418994924713

ACCEPT_M = (0, 12, 30, 42)
ACCEPT_L = (4, 4, 4, 4)


@pytest.fixture(scope="session")
def modulated():
    return make_potential("pendulum_modulated")


@pytest.fixture(scope="session")
def pendulum():
    return make_potential("pendulum")


@pytest.fixture(scope="session")
def mod_states(modulated):
    return periodic_states(modulated, 1, 32)


@pytest.fixture(scope="session")
def mod_fronts(modulated, mod_states):
    g = GridSpec(1, -20, 20, 32)
    return (solve_heteroclinic(modulated, g, "up", states=mod_states),
            solve_heteroclinic(modulated, g, "down", states=mod_states))


@pytest.fixture(scope="session")
def pend_fronts(pendulum):
    st = periodic_states(pendulum, 1, 32)
    g = GridSpec(1, -20, 20, 32)
    return (solve_heteroclinic(pendulum, g, "up", states=st),
            solve_heteroclinic(pendulum, g, "down", states=st))


@pytest.fixture(scope="session")
def accept_spec():
    return TransitionSpec.single(ACCEPT_M, ACCEPT_L, 0.1, alphabet_size=1)


@pytest.fixture(scope="session")
def multi_report(modulated, mod_states, mod_fronts, accept_spec):
    return solve_multitransition(modulated, GridSpec(1, -15, 57, 32), accept_spec,
                                 states=mod_states, heteroclinics=mod_fronts)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
