import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from klinf_bai import MomentClass, Pareto

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mc9():
    return MomentClass("power", 9.0, 2.0)


@pytest.fixture(scope="session")
def pareto_arms():
    return [Pareto(4.0, 1.875), Pareto(4.0, 1.5), Pareto(4.0, 1.25), Pareto(4.0, 0.75)]


@pytest.fixture(scope="session")
def pareto_laws(pareto_arms):
    return [a.discretize(256) for a in pareto_arms]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
