import pytest
from hypothesis import HealthCheck, settings

from causalkv.protocols import by_name
from causalkv.simnet import Simulation

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def simulate(config, protocol, programs, trace=True):
    return Simulation(config, by_name(protocol), trace=trace).run(programs)


@pytest.fixture
def run_sim():
    return simulate


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
