import os

import pytest
from hypothesis import HealthCheck, settings


settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=300, deadline=None, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    store = item.config._criteria
    entry = store.setdefault(n, {"title": title, "status": "PASS", "detail": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            if entry["status"] == "PASS":
                entry["status"] = "SKIP"
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            entry["detail"].append(reason)
        elif report.failed:
            entry["status"] = "FAIL"
            msg = str(call.excinfo.value).splitlines() if call.excinfo else []
            entry["detail"].append(f"{item.name}: {msg[0] if msg else 'failed'}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_criteria", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        e = store[n]
        line = f"criterion {n:>2} [{e['status']}] {e['title']}"
        if e["detail"]:
            line += f" ({'; '.join(e['detail'])})"
        terminalreporter.write_line(line)


@pytest.fixture
def table_law():
    from pwlcf.law import six_segment_law

    return six_segment_law()
