import re

_CRITERION = re.compile(r"::test_(A\d+)_")
_results: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    key = m.group(1)
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else ("SKIP" if report.outcome == "skipped" else "FAIL")
        _results[key] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results, key=lambda k: int(k[1:])):
        status, detail = _results[key]
        terminalreporter.write_line(f"{key}: {status}  {detail}".rstrip())
