"""Shared pytest hooks.

The acceptance tests record one summary line per criterion; pytest captures
stdout from passing tests, so the lines are replayed after the run where
they stay visible.
"""

import pytest

CRITERION_LINES = []


@pytest.fixture(scope="session")
def criterion_lines():
    return CRITERION_LINES


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)
