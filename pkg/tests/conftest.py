import contextlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion as PASS or FAIL."""

    @contextlib.contextmanager
    def _run(number, title):
        c = _Criterion(number, title)
        try:
            yield c
        except BaseException:
            _CRITERIA[number] = ("FAIL", title, c.detail)
            print(f"criterion {number:2d}: FAIL  {title}  {c.detail}")
            raise
        _CRITERIA[number] = ("PASS", title, c.detail)
        print(f"criterion {number:2d}: PASS  {title}  {c.detail}")

    return _run


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}  {detail}".rstrip())
