import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from subsparse import set_threads  # noqa: E402


@pytest.fixture(autouse=True)
def _single_thread():
    set_threads(None)
    yield
    set_threads(None)


_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and return ``ok``."""
    def record(num: int, name: str, ok: bool, detail: str) -> bool:
        line = f"[{num:02d}] {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _RESULTS[num] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[num])
