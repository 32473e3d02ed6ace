import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)$")
_outcomes: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    number, label = int(m.group(1)), m.group(2).replace("_", " ")
    ok = _outcomes.get(number, (label, True))[1] and not report.failed
    if report.when == "call" or report.failed:
        _outcomes[number] = (label, ok)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        label, ok = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:2d} {label}: {'PASS' if ok else 'FAIL'}")
