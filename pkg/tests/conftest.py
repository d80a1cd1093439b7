import numpy as np
import pytest

from fronttrack.model import DecoupledBurgers, PSystem, QuadraticModel
from fronttrack.tracker import PiecewiseConstantDatum, RunConfig, State, run


@pytest.fixture(scope="session")
def burgers():
    return DecoupledBurgers()


@pytest.fixture(scope="session")
def quadratic():
    return QuadraticModel()


@pytest.fixture(scope="session")
def psystem():
    return PSystem()


@pytest.fixture(scope="session")
def burgers_shock_log(burgers):
    """A single 1-shock next to a 2-rarefaction, zero source."""
    datum = PiecewiseConstantDatum((0.0,), (State(0.2, -0.05), State(-0.1, 0.1)))
    return run(burgers, datum, None, RunConfig(0.01, 0.005, 0.5))


@pytest.fixture(scope="session")
def quadratic_log(quadratic):
    datum = PiecewiseConstantDatum((-0.2, 0.0, 0.2),
                                   (State(0.0, 0.0), State(0.06, -0.04), State(-0.03, 0.05), State(0.0, 0.0)))
    return run(quadratic, datum, None, RunConfig(0.01, 0.005, 0.3))


def random_ball_state(rng, r):
    rad = r * np.sqrt(rng.uniform())
    ang = rng.uniform(0, 2 * np.pi)
    return State(rad * np.cos(ang), rad * np.sin(ang))


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one summary line per acceptance criterion."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
