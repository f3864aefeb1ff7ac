import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import WORKED_DEFS, WORKED_TRACE  # noqa: E402

from msgflow.model import parse_message_definitions, parse_traces  # noqa: E402


@pytest.fixture
def worked_dict():
    return parse_message_definitions(WORKED_DEFS)


@pytest.fixture
def worked_traces(worked_dict):
    return parse_traces(WORKED_TRACE, worked_dict)


@pytest.fixture
def worked_files(tmp_path, worked_dict):
    defs = tmp_path / "defs.txt"
    traces = tmp_path / "t.txt"
    defs.write_text(WORKED_DEFS)
    traces.write_text(WORKED_TRACE + "\n")
    return defs, traces


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
