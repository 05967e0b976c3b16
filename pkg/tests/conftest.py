import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def report(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = (f"[{'PASS' if passed else 'FAIL'}] criterion {number}: "
                                    f"{title} ({detail})")
        print(ACCEPTANCE_LINES[number])

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
