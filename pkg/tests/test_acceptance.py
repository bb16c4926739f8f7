"""Acceptance suite: every criterion at its stated budget and tolerance.

The whole ``full`` preset is run once per session; each criterion is then a
separate test that prints one PASS/FAIL line.
"""

import json
import os

import pytest

from l2sp.validation import CRITERIA, run_suite

WORKERS = min(8, os.cpu_count() or 1)


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    results = run_suite("full", seed=0, out=str(out), workers=WORKERS, echo=None)
    return out, {r.cid: r for r in results}


@pytest.mark.slow
@pytest.mark.parametrize("cid", CRITERIA)
def test_criterion(suite, cid, capsys):
    _, results = suite
    r = results[cid]
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()


@pytest.mark.slow
def test_report_lists_each_criterion_once(suite):
    out, _ = suite
    report = json.loads((out / "report.json").read_text())
    ids = [c["id"] for c in report["criteria"]]
    assert sorted(ids, key=CRITERIA.index) == list(CRITERIA) and len(set(ids)) == len(ids)
    assert sorted(os.listdir(out)) == sorted([f"{c}.csv" for c in CRITERIA] + ["report.json"])
