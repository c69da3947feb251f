import re
from pathlib import Path

import numpy as np
import pytest

from gdnlab import kernels

FIXTURES = Path(__file__).parent / "fixtures"

_criteria = {}
_CRIT = re.compile(r"test_criterion_(\d+)_(\w+)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(params=["compiled", "python"])
def search_backend(request):
    if request.param == "compiled":
        if kernels.compiled_search is None:
            pytest.skip("compiled kernel not built")
        return kernels.compiled_search
    return kernels.python_search


def pytest_runtest_logreport(report):
    m = _CRIT.search(report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[key] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), outcome in sorted(_criteria.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {name.replace('_', ' ')}: {verdict}")
