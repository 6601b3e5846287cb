import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CENTROID = np.full(3, 1.0 / 3.0)


# Acceptance criteria report one line each in the terminal summary, pass or fail.
_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, description)`` for the calling acceptance test."""
    entry = {"detail": ""}

    def record(number, text):
        entry.update(number=number, text=text)
        return entry

    yield record
    if "number" in entry:
        rep = getattr(request.node, "rep_call", None)
        entry["ok"] = rep is not None and rep.passed
        _CRITERIA[entry["number"]] = entry


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if e['ok'] else 'FAIL'}  {e['text']}"
        if e["detail"]:
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)
