import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import t1_instance  # noqa: E402

CRITERIA = []


@pytest.fixture
def t1():
    return t1_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report_criterion():
    def report(number, ok, detail):
        CRITERIA.append((number, bool(ok), detail))
    return report


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
