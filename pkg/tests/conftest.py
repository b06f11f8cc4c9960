"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _outcomes.setdefault(number, {"title": title, "ok": True, "seconds": 0.0, "details": []})
    entry["seconds"] += report.duration
    if report.failed:
        entry["ok"] = False
    if report.when == "call":
        entry["details"] += [v for k, v in report.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(
            f"criterion {number}: {status}  {e['title']}  [{e['seconds']:.1f}s]" + (f"  {detail}" if detail else "")
        )
