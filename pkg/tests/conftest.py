from __future__ import annotations

import pytest

from diagnosys.engine import build_symptom_index
from diagnosys.kb import load_knowledge_base


@pytest.fixture(scope="session")
def kb():
    return load_knowledge_base()


@pytest.fixture(scope="session")
def index(kb):
    return build_symptom_index(kb)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per gate criterion so a run's verdict is scannable."""
    lines: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            word = "PASS" if status == "passed" else "FAIL"
            # a test that failed in setup and again in call stays FAIL
            if lines.get(name) != "FAIL":
                lines[name] = word
    if not lines:
        return
    terminalreporter.write_sep("-", "acceptance gate")
    for name in sorted(lines):
        terminalreporter.write_line(f"{lines[name]}  {name}")
