import pytest

_CRITERIA = {}


class _Recorder:
    def __call__(self, number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
