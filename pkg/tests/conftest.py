# (status, criterion, detail) lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def record_acceptance(criterion: str, passed: bool | None, detail: str = "") -> None:
    """Record a criterion outcome; ``passed=None`` marks an informational line."""
    status = "INFO" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES.append((status, criterion, detail))
    print(f"[{status}] {criterion} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for status, criterion, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{status}  {criterion}  {detail}".rstrip())
