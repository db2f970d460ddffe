"""Smoke test: the kernel benchmark runs and compares both backends."""

from __future__ import annotations

import subprocess
import sys


def test_bench_reports_both_backends():
    proc = subprocess.run(
        [sys.executable, "-m", "fusionsort.bench", "--repeat", "1"],
        capture_output=True, text=True, timeout=180.0)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0].split() == ["kernel", "numpy", "compiled", "speedup"]
    body = [ln for ln in lines[1:] if ln.strip()]
    assert len(body) == 3
    for line in body:
        assert "ms" in line
        # the compiled column is present in this environment
        assert "n/a" not in line
