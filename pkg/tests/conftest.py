import re
import time

import pytest
from hypothesis import HealthCheck, settings

from edgeti.domain.signing import KeyRing, derive_key
from edgeti.domain.types import DeviceId

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

SUITE_BUDGET_S = 60.0

# one line per acceptance criterion, printed after capture ends
ACCEPTANCE_LINES: dict[int, str] = {}

_CRITERION_TEST = re.compile(r"test_acceptance\.py::test_c(\d+)")


def record_acceptance(criterion: int, line: str) -> None:
    ACCEPTANCE_LINES[criterion] = line


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_TEST.search(item.nodeid)
    if match and report.when == "call" and report.failed:
        criterion = int(match.group(1))
        ACCEPTANCE_LINES[criterion] = f"ACCEPTANCE C{criterion} FAIL - {item.nodeid}"


def pytest_configure(config):
    config._suite_started = time.monotonic()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for criterion in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[criterion])


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.monotonic() - session.config._suite_started
    ok = elapsed < SUITE_BUDGET_S
    print(
        f"\nACCEPTANCE C10 {'PASS' if ok else 'FAIL'} - hermetic suite wall time "
        f"{elapsed:.1f}s (budget {SUITE_BUDGET_S:.0f}s)"
    )
    if not ok and session.exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture
def dev_a():
    return DeviceId("site1", "dev-a")


@pytest.fixture
def dev_b():
    return DeviceId("site1", "dev-b")


@pytest.fixture
def coordinator_id():
    return DeviceId("site1", "coordinator")


@pytest.fixture
def keyring(dev_a, dev_b, coordinator_id):
    ring = KeyRing()
    for device in (dev_a, dev_b, coordinator_id):
        ring.register(device, derive_key(7, device))
    return ring
