"""Shared pytest plumbing for the suite.

Acceptance tests report one PASS/FAIL line each through record_criterion();
the collected lines are printed in a dedicated terminal section at the end
of the run so the verdict on every headline property is visible at a glance.
"""
_criterion_lines: list[str] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    """Record one acceptance-criterion outcome for the end-of-run summary."""
    status = "PASS" if passed else "FAIL"
    line = f"[{status}] {name}"
    if detail:
        line += f" | {detail}"
    _criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _criterion_lines:
        terminalreporter.write_line(line)
