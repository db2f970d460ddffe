"""Shared fixtures: CLI subprocess runner and small deterministic datasets."""

from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest


@pytest.fixture(scope="session")
def run_cli():
    """Run `python -m fusionsort ...` and return (exit code, stdout, stderr)."""

    def _run(*args: str, timeout: float = 300.0):
        proc = subprocess.run(
            [sys.executable, "-m", "fusionsort", *map(str, args)],
            capture_output=True, text=True, timeout=timeout)
        return proc.returncode, proc.stdout, proc.stderr

    return _run


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


# One line per acceptance criterion, echoed after the run so the verdicts
# stay visible even when pytest captures test stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture()
def criterion():
    """Record a [PASS]/[FAIL] verdict line, then assert the criterion held."""

    def record(name: str, failures: list[str]) -> None:
        line = f"[{'FAIL' if failures else 'PASS'}] {name}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not failures, f"{name}: " + "; ".join(failures)

    return record
