import pytest

from hammerpuf.dram import Geometry, ModelParams, derive_device
from hammerpuf.engine import PufConfig

KB = 1024


@pytest.fixture(scope="session")
def params():
    return ModelParams.default()


@pytest.fixture(scope="session")
def quiet_params(params):
    """Default calibration with the per-measurement jitter switched off."""
    return params.replace(noise_log_sd=0.0)


@pytest.fixture(scope="session")
def device(params):
    return derive_device(1, Geometry(), params)


@pytest.fixture(scope="session")
def quiet_device(quiet_params):
    return derive_device(1, Geometry(), quiet_params)


@pytest.fixture
def small_config():
    return PufConfig(puf_size=16 * KB)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
