import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES: list[str] = []


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""
    def _record(number: int, passed: bool, text: str):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        _LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
