import numpy as np
import pytest

from perfid.formats import parse_format

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["2,2,2,3", "3,4,5", "2,2,3,4", "3,3,5", "2,2,2,5", "sym3:3,2,2"])
def fast_format(request):
    return parse_format(request.param)
