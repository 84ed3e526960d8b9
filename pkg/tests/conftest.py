import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("repo")

from raman_nli import FiberSpec, RamanSpectrum, nonlinear_transfer  # noqa: E402


@pytest.fixture(scope="session")
def fiber() -> FiberSpec:
    return FiberSpec.from_engineering()


@pytest.fixture(scope="session")
def spectrum() -> RamanSpectrum:
    return RamanSpectrum.analytic()


@pytest.fixture(scope="session")
def transfer(spectrum):
    return nonlinear_transfer(spectrum, "dual")


@pytest.fixture(scope="session")
def transfer_single(spectrum):
    return nonlinear_transfer(spectrum, "single")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
