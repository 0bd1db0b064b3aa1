import math

import pytest

from pnsim.analytics import DecoyScheme
from pnsim.photon_stats import poisson_pmf

MEAN_P06 = -math.log(0.6)

# One PASS/FAIL line per end-to-end acceptance check, shown after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pmf_p06():
    """Poisson source with 60 percent vacuum probability."""
    return poisson_pmf(MEAN_P06)


@pytest.fixture(scope="session")
def scheme3():
    """Signal plus two decoys, the configuration used for yield tests."""
    return DecoyScheme.poisson([(0.5, 0.7), (0.1, 0.2), (0.002, 0.1)])
