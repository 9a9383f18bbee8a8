import pytest

_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Report one acceptance line immediately and again in the run summary."""

    def emit(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'} {title}: {detail}"
        _VERDICTS.append((number, line))
        with capsys.disabled():
            print(f"\n{line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS, key=lambda v: v[0]):
            terminalreporter.write_line(line)
