import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record the one-line PASS/FAIL verdict of an acceptance criterion."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
