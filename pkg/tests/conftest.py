from __future__ import annotations

import pytest

RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config: pytest.Config) -> None:
    config.stash[RESULTS_KEY] = {}


@pytest.fixture
def criterion(request: pytest.FixtureRequest):
    """Record the outcome of the acceptance criterion named by the test's marker.

    ``criterion(ok, detail)`` stores one pass/fail line and returns ``ok``.
    """
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0]
    results = request.config.stash[RESULTS_KEY]

    def record(ok: bool, detail: str) -> bool:
        results[number] = (bool(ok), detail)
        return ok

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item: pytest.Item, call: pytest.CallInfo):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" or not report.failed:
        return
    results = item.config.stash[RESULTS_KEY]
    number = marker.args[0]
    if number not in results:
        results[number] = (False, f"raised {call.excinfo.typename}: {call.excinfo.value}")


def pytest_terminal_summary(terminalreporter, exitstatus: int, config: pytest.Config) -> None:
    results = config.stash[RESULTS_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
