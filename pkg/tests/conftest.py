from __future__ import annotations

from collections import defaultdict

_outcomes: dict = defaultdict(list)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            _outcomes[int(value)].append((report.nodeid, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_outcomes):
        results = _outcomes[crit]
        ok = all(outcome == "passed" for _, outcome in results)
        failed = [nid.split("::")[-1] for nid, outcome in results if outcome != "passed"]
        line = f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'} ({len(results)} checks)"
        if failed:
            line += " failing: " + ", ".join(failed)
        terminalreporter.write_line(line)
