"""Shared fixtures plus a one-line-per-criterion summary for the acceptance suite."""

import numpy as np
import pytest

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    entry = _ACCEPTANCE.get(report.nodeid)
    if entry is None:
        return
    if report.when == "call" or report.failed or report.skipped:
        if entry["outcome"] in (None, "passed"):
            entry["outcome"] = report.outcome
            entry["seconds"] = entry.get("seconds", 0.0) + report.duration


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            number, title = marker.args
            _ACCEPTANCE[item.nodeid] = {"number": number, "title": title, "outcome": None}


def pytest_terminal_summary(terminalreporter):
    ran = [e for e in _ACCEPTANCE.values() if e["outcome"] is not None]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(ran, key=lambda e: e["number"]):
        verdict = "PASS" if e["outcome"] == "passed" else e["outcome"].upper()
        terminalreporter.write_line(f"AC{e['number']} {verdict:<7} {e['title']} ({e['seconds']:.1f}s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
