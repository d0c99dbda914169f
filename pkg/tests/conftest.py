import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from abranch.fixtures import table4a_fixture  # noqa: E402


@pytest.fixture(scope="session")
def table4a():
    return table4a_fixture()


def pytest_terminal_summary(terminalreporter):
    from gate import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, title, detail = RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
