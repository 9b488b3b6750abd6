from __future__ import annotations

import pytest

from cdo_store.fixtures import build_apple_fixture

from helpers import new_store

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, limit): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title, limit = marker.args
    entry = _criteria.setdefault(number, {"title": title, "limit": limit, "ok": True, "seconds": 0.0})
    entry["seconds"] += call.duration
    if call.excinfo is not None:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(
            f"[{status}] {number:>2}. {entry['title']} ({entry['seconds']:.2f}s, limit {entry['limit']}s)"
        )


@pytest.fixture
def store():
    return new_store()


@pytest.fixture
def apple():
    return build_apple_fixture()
