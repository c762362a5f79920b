import numpy as np
import pytest
from hypothesis import settings

from hetinf import networks
from hetinf.bn import make_network

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def asia():
    return networks.load("asia")


@pytest.fixture(scope="session")
def survey():
    return networks.load("survey")


@pytest.fixture(scope="session")
def alarm():
    return networks.load("alarm")


@pytest.fixture
def chain_ab():
    """A -> B with P(A=1)=0.3, P(B=1|A=0)=0.2, P(B=1|A=1)=0.9."""
    return make_network({"A": ("0", "1"), "B": ("0", "1")}, {"B": ["A"]},
                        {"A": [0.7, 0.3], "B": [[0.8, 0.2], [0.1, 0.9]]}, "chain_ab")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
