import os

import pytest

from helpers import ACCEPTANCE_LINES


def pytest_collection_modifyitems(config, items):
    if os.environ.get("NOISYMPO_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="long run; set NOISYMPO_LONG=1 to enable")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
