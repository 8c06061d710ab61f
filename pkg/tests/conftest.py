import pytest

_CRITERIA: dict = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record one line per acceptance criterion: log(number, passed, detail)."""

    def log(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
