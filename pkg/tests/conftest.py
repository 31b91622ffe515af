import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": False, "notes": []})
    if rep.when == "call" or rep.failed:
        entry["seen"] = True
        if rep.failed:
            entry["ok"] = False
    detail = getattr(item, "criterion_detail", None)
    if rep.when == "call" and detail:
        entry["notes"].append(detail)


@pytest.fixture
def detail(request):
    """Attach a one-line measured summary to the criterion report."""
    def note(text):
        old = getattr(request.node, "criterion_detail", None)
        request.node.criterion_detail = text if old is None else f"{old}; {text}"
    return note


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        if not entry["seen"]:
            status = "SKIP"
        else:
            status = "PASS" if entry["ok"] else "FAIL"
        line = f"criterion {number:2d} {status}  {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        terminalreporter.write_line(line)
