from fractions import Fraction

from conftest import tiny
from models.instance import Allocation, Instance
from tools.verify import quota_problems, verify_allocation


def small() -> Instance:
    return Instance(2, 3, {(0, 0): 3, (0, 1): 1, (1, 1): 2, (1, 2): 2})


def test_verify_passes():
    report = verify_allocation(small(), Allocation({0: 0, 1: 1, 2: 1}), claimed=Fraction(3))
    assert report.ok
    assert report.value == 3
    assert report.problems == []


def test_verify_reports_every_failure():
    report = verify_allocation(
        small(),
        Allocation({0: 0, 2: 1, 5: 0, 1: 7}),
        claimed=Fraction(4),
        duplicates=[2, 2],
        at_least=Fraction(3),
    )
    assert not report.ok
    assert report.value == 2
    assert report.problems == [
        "item 2 is owned twice",
        "item 1 goes to unknown agent 7",
        "item 5 is out of range",
        "claimed value 4 but the allocation is worth 2",
        "agent 1 gets 2, below 3",
    ]


def test_quota_problems():
    ci = tiny()
    assert quota_problems(ci, Allocation({0: 0, 1: 1, 2: 1}), Fraction(1)) == []
    assert quota_problems(ci, Allocation({0: 0, 1: 1}), Fraction(1)) == [
        "light agent 1 holds 1 light items, needs 2"
    ]
    assert quota_problems(ci, Allocation({0: 0, 1: 1}), Fraction(2)) == []
    assert quota_problems(ci, Allocation({0: 1, 1: 1}), Fraction(2)) == [
        "heavy agent 0 holds no item of its set"
    ]
    assert quota_problems(ci, Allocation({4: 0, 0: 9}), Fraction(2)) == [
        "item 0 goes to unknown agent 9",
        "item 4 is out of range",
        "heavy agent 0 holds no item of its set",
        "light agent 1 holds 0 light items, needs 1",
    ]
