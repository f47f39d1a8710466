import pytest

from wavelnd.field import DomainBox

ACCEPTANCE_LINES: list = []


@pytest.fixture
def box():
    return DomainBox(1.0, 2.0, 1.0)


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
