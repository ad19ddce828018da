import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            ok = report.outcome == "passed"
            prev = _CRITERIA.get(value, True)
            _CRITERIA[value] = prev and ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: (int(s.split()[0].rstrip("abcdefgh")), s)):
        terminalreporter.write_line(f"{'PASS' if _CRITERIA[name] else 'FAIL'}  criterion {name}")
