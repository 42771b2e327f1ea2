"""Collects acceptance outcomes and prints one line per criterion at the end."""

import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    key = tuple(marker.args)
    _criteria[key] = _criteria.get(key, True) and not report.failed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), ok in _criteria.items():
        terminalreporter.write_line(f"criterion {n!s:>7}  {'PASS' if ok else 'FAIL'}  {title}")
