"""Acceptance gate: one test per criterion, each printing a single pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""
import time

import pytest

from fraceig import acceptance
from fraceig.cli import main

# (criterion, runtime limit in seconds)
LIMITS = {1: 30, 2: 10, 3: 60, 4: 60, 5: 30, 6: 10, 7: 60, 8: 120, 9: 180}


def _report(result, elapsed, limit):
    ok = result.passed and elapsed <= limit
    print(f"\n{result.line()}  [{elapsed:.2f}s / {limit}s]  -> {'pass' if ok else 'fail'}")
    for c in result.checks:
        print(f"    {'ok ' if c.passed else 'BAD'} {c.label}: {c.value:.6g}")
    return ok


@pytest.mark.parametrize("number", sorted(LIMITS))
def test_criterion(number):
    start = time.perf_counter()
    result = acceptance.CRITERIA[number]()
    elapsed = time.perf_counter() - start
    assert _report(result, elapsed, LIMITS[number]), result.line()


def test_criterion_10_selftest_deterministic(tmp_path):
    start = time.perf_counter()
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["selftest", "--out", str(out), "--seed", "7"]) == 0
        outputs.append((out / "selftest.csv").read_bytes())
    elapsed = time.perf_counter() - start
    same = outputs[0] == outputs[1]
    ok = same and elapsed <= 600
    print(f"\ncriterion 10 {'PASS' if same else 'FAIL'}  selftest CSVs byte-identical"
          f"  [{elapsed:.2f}s / 600s]  -> {'pass' if ok else 'fail'}")
    assert ok
