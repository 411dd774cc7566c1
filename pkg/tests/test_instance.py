from fractions import Fraction

import pytest

from models.instance import Allocation, Instance
from tools.generators import gen_random
from tools.instance_io import (
    allocation_from_doc,
    allocation_to_doc,
    dump_document,
    instance_from_doc,
    instance_to_doc,
    parse_document,
    read_instance,
    write_instance,
)
from tools.oracles import (
    brute_force_opt,
    enumeration_size,
    normalize,
    single_item_matching,
    solve_vector_enumeration,
    value,
)
from utils.errors import GuardExceeded, InstanceParseError, PreconditionError
from utils.rational import ceil_log2, floor_log2, format_rational, parse_rational


def small_instance() -> Instance:
    # agent 0 likes everything a bit, agent 1 only item 2 but a lot
    return Instance(
        2,
        3,
        {(0, 0): 2, (0, 1): 3, (0, 2): 1, (1, 2): 5, (1, 1): Fraction(1, 2)},
    )


def test_instance_drops_zero_utilities():
    inst = Instance(1, 2, {(0, 0): 0, (0, 1): 4})
    assert inst.utilities == {(0, 1): Fraction(4)}
    assert inst.u(0, 0) == 0


def test_instance_rejects_negative_and_out_of_range():
    with pytest.raises(PreconditionError):
        Instance(1, 1, {(0, 0): -1})
    with pytest.raises(PreconditionError):
        Instance(1, 1, {(1, 0): 1})


def test_allocation_refuses_second_owner():
    alloc = Allocation()
    alloc.assign(0, 1)
    alloc.assign(0, 1)
    with pytest.raises(PreconditionError):
        alloc.assign(0, 0)


def test_value_is_the_poorest_agent():
    inst = small_instance()
    assert value(inst, Allocation({0: 0, 1: 0, 2: 1})) == 5
    assert value(inst, Allocation({0: 0})) == 0


def test_brute_force_finds_optimum():
    opt, alloc = brute_force_opt(small_instance())
    assert opt == 5
    assert value(small_instance(), alloc) == opt


def test_brute_force_guard():
    inst = gen_random(4, 12, 1.0, 5, seed=1)
    assert enumeration_size(inst) == 4**12
    with pytest.raises(GuardExceeded):
        brute_force_opt(inst, guard=1000)


def test_single_item_matching_is_bottleneck_optimal():
    inst = Instance(2, 2, {(0, 0): 5, (0, 1): 4, (1, 0): 3})
    got, alloc = single_item_matching(inst)
    assert got == 3
    assert alloc.owner == {1: 0, 0: 1}


def test_normalize_scales_and_caps():
    inst = Instance(1, 2, {(0, 0): 1, (0, 1): 100})
    norm = normalize(inst, Fraction(10))
    # factor 2n/M = 4/10; cutoff M/2n = 5/2 removes the utility 1
    assert norm.u(0, 0) == 0
    assert norm.u(0, 1) == 4


def test_normalize_needs_positive_guess():
    with pytest.raises(PreconditionError):
        normalize(small_instance(), Fraction(0))


@pytest.mark.parametrize("seed", range(6))
def test_vector_enumeration_within_factor_four(seed):
    inst = gen_random(2, 6, 0.8, 12, seed)
    opt, _ = brute_force_opt(inst)
    got, alloc = solve_vector_enumeration(inst)
    assert value(inst, alloc) == got
    assert 4 * got >= opt


def test_rational_parsing():
    assert parse_rational("3/4") == Fraction(3, 4)
    assert parse_rational(0.1) == Fraction(1, 10)
    assert parse_rational(7) == 7
    with pytest.raises(InstanceParseError):
        parse_rational("three")
    with pytest.raises(InstanceParseError):
        parse_rational(True)
    assert format_rational(Fraction(6, 3)) == 2
    assert format_rational(Fraction(1, 3)) == "1/3"


def test_log_helpers():
    assert ceil_log2(1) == 0
    assert ceil_log2(5) == 3
    assert floor_log2(Fraction(1, 3)) == -2
    assert floor_log2(Fraction(8)) == 3


def test_instance_document_roundtrip(tmp_path):
    inst = small_instance()
    path = str(tmp_path / "inst.json")
    write_instance(path, inst)
    assert read_instance(path) == inst


def test_instance_document_reports_field():
    with pytest.raises(InstanceParseError) as err:
        instance_from_doc({"m": 1, "n": 1, "utilities": [[0, 0]]})
    assert "utilities[0]" in str(err.value)
    with pytest.raises(InstanceParseError) as err:
        instance_from_doc({"m": 1, "n": 1, "utilities": [[0, 3, 1]]})
    assert err.value.field == "utilities"


def test_syntax_errors_carry_a_line():
    with pytest.raises(InstanceParseError) as err:
        parse_document('{\n  "m": 1,\n  "n": }')
    assert err.value.line == 3


def test_dump_is_stable_and_parsable():
    doc = instance_to_doc(small_instance())
    text = dump_document(doc)
    assert text == dump_document(parse_document(text))
    assert instance_from_doc(parse_document(text)) == small_instance()


def test_allocation_document_keeps_first_owner():
    doc = {"owner": [[0, 1], [0, 0], [2, 0]], "value": "5/2", "extra": True}
    alloc, claimed, duplicates = allocation_from_doc(doc)
    assert alloc.owner == {0: 1, 2: 0}
    assert claimed == Fraction(5, 2)
    assert duplicates == [0]
    assert allocation_to_doc(alloc, claimed)["value"] == "5/2"
