"""Pytest config: acceptance reporting and the CollegeMsg dataset locator."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

ACCEPTANCE_FILE = "test_acceptance.py"

_DATASET_NAMES = ("CollegeMsg.txt", "CollegeMsg.txt.gz", "CollegeMsg.csv", "CollegeMsg.csv.gz")


def collegemsg_path():
    """Locate the CollegeMsg dataset via TGAC_DATA_DIR, ./data, or the repo root."""
    roots = []
    if os.environ.get("TGAC_DATA_DIR"):
        roots.append(Path(os.environ["TGAC_DATA_DIR"]))
    here = Path(__file__).resolve().parent.parent
    roots += [here / "data", here]
    for root in roots:
        for name in _DATASET_NAMES:
            p = root / name
            if p.exists():
                return p
    return None


requires_collegemsg = pytest.mark.skipif(
    collegemsg_path() is None,
    reason="CollegeMsg dataset not present (set TGAC_DATA_DIR or place CollegeMsg.txt[.gz] in ./data)",
)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale runs (minutes; needs the CollegeMsg dataset)")


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion."""
    if ACCEPTANCE_FILE not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {status}", flush=True)
    elif report.when == "setup" and report.skipped:
        print(f"\n[ACCEPTANCE] {name}: SKIP (dataset unavailable)", flush=True)
