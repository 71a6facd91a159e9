import warnings

import pytest
from hypothesis import HealthCheck, settings

from stabinv import plants

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_jordan_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="repeated near-zero poles")
        yield


@pytest.fixture(scope="session")
def ex1():
    return plants.ex1_plant()


@pytest.fixture(scope="session")
def ex1_pi():
    return plants.ex1_perturbed()


@pytest.fixture(scope="session")
def ex2():
    return plants.ex2_plant()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
