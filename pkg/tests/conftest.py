import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def emit(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL':4}  {label:<44} {detail}".rstrip()
        _LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
