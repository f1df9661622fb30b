_acceptance_results = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid or report.when != "call":
        return
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    detail = ""
    if report.skipped and isinstance(report.longrepr, tuple):
        detail = f" ({report.longrepr[2].removeprefix('Skipped: ')})"
    name = report.nodeid.split("::")[-1]
    _acceptance_results.append(f"{outcome}  {name}{detail}")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in _acceptance_results:
        terminalreporter.write_line(line)
