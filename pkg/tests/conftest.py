import numpy as np
import pytest

from hadamard_gff.flow import ConcentricDisk, build_flow, flow_grid
from hadamard_gff.hadamard import build_exact_mode, build_kernel_mode
from hadamard_gff.harmonic import harmonic_measures

DISK = ConcentricDisk((0.0, 0.0), 1.0)


def disk_flow(n, M):
    return build_flow(flow_grid(DISK, n), DISK, M)


@pytest.fixture(scope="session")
def flow48():
    return disk_flow(48, 16)


@pytest.fixture(scope="session")
def exact48(flow48):
    return build_exact_mode(flow48)


@pytest.fixture(scope="session")
def hms48(flow48):
    return harmonic_measures(flow48)


@pytest.fixture(scope="session")
def kernel48(flow48, hms48):
    return build_kernel_mode(flow48, hms48)


@pytest.fixture(scope="session")
def flow96():
    return disk_flow(96, 32)


@pytest.fixture(scope="session")
def exact96(flow96):
    return build_exact_mode(flow96)


@pytest.fixture(scope="session")
def hms96(flow96):
    return harmonic_measures(flow96)


@pytest.fixture(scope="session")
def flow128():
    return disk_flow(128, 40)


@pytest.fixture(scope="session")
def exact128(flow128):
    return build_exact_mode(flow128)


@pytest.fixture(scope="session")
def hms128(flow128):
    return harmonic_measures(flow128)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in range(1, 13):
        if c not in ACCEPTANCE:
            terminalreporter.write_line(f"criterion {c:2d}: NOT RUN  (deselected or errored before a verdict)")
            continue
        passed, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
