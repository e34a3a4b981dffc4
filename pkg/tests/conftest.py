"""Shared pytest wiring: acceptance criteria report one PASS/FAIL line each."""

import pytest

_RESULTS = {}
_NOTES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): test that decides one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    name = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        ok = rep.passed and _RESULTS.get(name, True)
        _RESULTS[name] = ok


@pytest.fixture
def note():
    """Record an informational line (reported, not asserted) for the terminal summary."""
    def add(text):
        _NOTES.append(text)
    return add


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok in _RESULTS.items():
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
    if _NOTES:
        tr.section("reported observations")
        for line in _NOTES:
            tr.write_line(line)
