"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import filecmp

import pytest

from wavelab import cli
from wavelab.verify import CHECKS, NAMES, RunCache, format_line

RESULTS = {}


@pytest.fixture(scope="session")
def cache():
    return RunCache()


def record(res):
    RESULTS[res.criterion] = format_line(res)
    print(RESULTS[res.criterion])
    return res


@pytest.mark.parametrize("num, check", [(n, fn) for n, fn, _ in CHECKS],
                         ids=[f"{n:02d}-{NAMES[n]}" for n, _, _ in CHECKS])
def test_criterion(cache, num, check):
    res = record(check(cache, False))
    assert res.status == "pass", format_line(res)


def test_verify_twice_is_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert cli.main(["verify", "--only", "3,10,11,12,15", "--output", str(d)]) == 0
    names = ["verification.csv", "verification_details.csv"]
    _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    assert not mismatch and not errors
