import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

_ACCEPTANCE: dict = {}


class AcceptanceRecorder:
    """Collects named checks for one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list = []
        self.runtime = None

    def check(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def verify(self):
        _ACCEPTANCE[self.number] = self
        failed = [f"{n} ({d})" for n, ok, d in self.checks if not ok]
        assert not failed, "; ".join(failed)


@pytest.fixture
def acceptance():
    return AcceptanceRecorder


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in range(1, 11):
        rec = _ACCEPTANCE.get(num)
        if rec is None:
            tr.write_line(f"criterion {num:2d}: NOT RUN")
            continue
        status = "PASS" if rec.passed else "FAIL"
        rt = f" [{rec.runtime:.1f} s]" if rec.runtime is not None else ""
        tr.write_line(f"criterion {num:2d}: {status}  {rec.title}{rt}")
        for name, ok, detail in rec.checks:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")
