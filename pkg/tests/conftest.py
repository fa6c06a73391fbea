import pytest

_criteria = {}


@pytest.fixture
def criterion(request):
    """Scratch dict for an acceptance test; put measured values under "detail"."""
    marker = request.node.get_closest_marker("criterion")
    entry = {"number": marker.args[0], "title": marker.args[1], "detail": "", "outcome": "not run"}
    _criteria[request.node.nodeid] = entry
    return entry


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _criteria.get(item.nodeid)
    if entry is not None and (rep.when == "call" or rep.failed):
        entry["outcome"] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(_criteria.values(), key=lambda e: e["number"]):
        line = f"{entry['outcome']:4}  {entry['number']:>2}. {entry['title']}"
        if entry["detail"]:
            line += f" ({entry['detail']})"
        terminalreporter.write_line(line)
