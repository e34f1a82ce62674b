"""The twelve acceptance criteria, one test each; every run prints a PASS/FAIL line."""

import pytest

from miura import acceptance


@pytest.mark.parametrize("check", acceptance.CRITERIA, ids=lambda c: c.__name__)
def test_criterion(check, capsys):
    res = check()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()


def test_there_are_twelve():
    assert len(acceptance.CRITERIA) == 12
    assert len({c.__name__ for c in acceptance.CRITERIA}) == 12
