"""Shared pytest configuration.

Tests marked ``@pytest.mark.acceptance(label)`` report one PASS/FAIL
line per label in the terminal summary, so the acceptance gate can be
read at a glance.
"""

import sys
from pathlib import Path

import pytest

# make tests/_lp_oracles.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

_acceptance_results: dict[str, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    label = marker.args[0]
    if report.when == "call":
        _acceptance_results[label] = report.passed
    elif report.when == "setup" and report.failed:
        _acceptance_results[label] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label in sorted(_acceptance_results):
        status = "PASS" if _acceptance_results[label] else "FAIL"
        terminalreporter.write_line(f"  {label}: {status}")
