import pytest

_LINES: list[str] = []


class Recorder:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, sink):
        self.sink = sink

    def __call__(self, number: int, ok: bool, detail: str, seconds: float) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.2f} s) {detail}"
        self.sink.append(line)
        print(line)
        return ok


@pytest.fixture(scope="session")
def criterion():
    return Recorder(_LINES)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
