import sys

import numpy as np
import pytest

from srec import numkit as nk


@pytest.fixture
def f64():
    with nk.precision(np.float64):
        yield


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda text: int(text.split()[1])):
            terminalreporter.write_line(line)
