import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from chemostat_dde.scenarios import standard_suite  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def suite():
    """Standard scenarios as ``{name: model}``."""
    return {name: sc.model() for name, sc in standard_suite().items()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
