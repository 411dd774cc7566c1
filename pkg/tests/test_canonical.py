from fractions import Fraction

import pytest

from models.instance import Allocation, Instance
from tools.canonical import (
    canonicalize,
    embed_solution,
    lift_solution,
    project_solution,
    satisfaction_problems,
    scale_exponent,
    scale_for_layers,
    validate_canonical,
)
from tools.generators import gen_gap_followup, gen_gap_instance, gen_random
from tools.oracles import brute_force_opt, normalize
from utils.errors import InvariantViolation, PreconditionError, TrivialScale

EPS = Fraction(1, 100)
M = Fraction(16)


def two_agents() -> Instance:
    """n = 8 so 2n = 16; agent 0 has one big item, agent 1 only bucket items"""
    utilities = {(0, 0): 10}
    for i in range(1, 5):
        utilities[(1, i)] = 4
    for i in range(5, 8):
        utilities[(1, i)] = 2
    return Instance(2, 8, utilities)


def test_scale_exponent():
    assert scale_exponent(8, M, EPS) == 2
    assert scale_exponent(8, Fraction(2), EPS) == 0


def test_canonical_shape():
    ci, backmap = canonicalize(two_agents(), M, EPS)
    assert backmap.s == 2
    assert len(ci.agents) == 2 * (2 * 2 + 1)
    assert ci.n_items == 8 + 2 * 2 * 2
    assert validate_canonical(ci) == []
    # bucket 2 holds (2, 4], threshold ceil(16 / (2 * 4))
    lam = ci.light[backmap.lam(1, 2)]
    assert lam.S == frozenset({1, 2, 3, 4})
    assert lam.N == 2
    assert ci.light[backmap.lam(1, 1)].N == 4
    assert ci.heavy[backmap.chi(0, 0)] == frozenset({0, *backmap.y_items(0)})


def test_trivial_scale():
    with pytest.raises(TrivialScale):
        canonicalize(two_agents(), Fraction(2), EPS)


def test_canonicalize_preconditions():
    with pytest.raises(PreconditionError):
        canonicalize(two_agents(), Fraction(17), EPS)
    with pytest.raises(PreconditionError):
        canonicalize(Instance(1, 2, {(0, 0): Fraction(1, 2)}), Fraction(4), EPS)


def test_embed_then_lift_keeps_value():
    inst = two_agents()
    ci, backmap = canonicalize(inst, M, EPS)
    alloc = Allocation({0: 0, 1: 1, 2: 1, 3: 1, 4: 1})
    embedded = embed_solution(inst, ci, backmap, alloc)
    assert satisfaction_problems(ci, embedded, Fraction(1)) == []
    lifted = lift_solution(inst, ci, backmap, embedded, Fraction(1))
    assert lifted.owner == alloc.owner


def test_embed_needs_value_m():
    inst = two_agents()
    ci, backmap = canonicalize(inst, M, EPS)
    with pytest.raises(PreconditionError):
        embed_solution(inst, ci, backmap, Allocation({0: 0, 1: 1}))


def test_lift_rejects_unsatisfied_and_weak_solutions():
    inst = two_agents()
    ci, backmap = canonicalize(inst, M, EPS)
    embedded = embed_solution(inst, ci, backmap, Allocation({0: 0, 1: 1, 2: 1, 3: 1, 4: 1}))
    broken = Allocation({i: a for i, a in embedded.owner.items() if i != 0})
    with pytest.raises(PreconditionError):
        lift_solution(inst, ci, backmap, broken, Fraction(1))
    # alpha = 2 still satisfies everyone but lowers the floor to 16 / 8
    assert lift_solution(inst, ci, backmap, embedded, Fraction(2)).owner[0] == 0

    weak = Instance(2, 8, {**inst.utilities, (0, 0): 3})
    with pytest.raises(InvariantViolation):
        lift_solution(weak, ci, backmap, embedded, Fraction(1))


def test_project_tolerates_missing_agents():
    inst = two_agents()
    ci, backmap = canonicalize(inst, M, EPS)
    embedded = embed_solution(inst, ci, backmap, Allocation({0: 0, 1: 1, 2: 1, 3: 1, 4: 1}))
    partial = Allocation({i: a for i, a in embedded.owner.items() if a != backmap.chi(1, 2)})
    projected = project_solution(ci, backmap, partial)
    assert projected.owner == {0: 0}


def test_scale_for_layers_keeps_thresholds_positive():
    ci, _ = canonicalize(two_agents(), M, EPS)
    scaled = scale_for_layers(ci, 2)
    assert {la.N for la in scaled.light.values()} == {1}
    with pytest.raises(PreconditionError):
        scale_for_layers(ci, 0)


def test_gap_instances_are_canonical():
    ci, pa = gen_gap_instance(3)
    assert ci.n_items == 39
    assert validate_canonical(ci) == []
    assert len(pa.T) == 3 * 2 + 1
    follow, fpa = gen_gap_followup(3)
    assert validate_canonical(follow) == []
    assert len(fpa.T) == 1


def test_validate_reports_bad_thresholds():
    ci, _ = gen_gap_instance(2)
    a = sorted(ci.light)[0]
    bad = ci.with_thresholds({a: 0})
    assert any("threshold 0" in p for p in validate_canonical(bad))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(30))
def test_optimal_allocation_survives_embed_and_lift(seed):
    raw = gen_random(2 + seed % 2, 8, 1.0, 12, seed)
    inst = normalize(raw, brute_force_opt(raw)[0])
    opt, alloc = brute_force_opt(inst)
    assert 8 <= opt <= 16
    ci, backmap = canonicalize(inst, opt, EPS)
    embedded = embed_solution(inst, ci, backmap, alloc)
    assert satisfaction_problems(ci, embedded, Fraction(1)) == []
    lifted = lift_solution(inst, ci, backmap, embedded, Fraction(1))
    floor = min(Fraction(2) ** backmap.s, opt / (2 * backmap.s))
    for B in range(inst.m):
        got = sum((inst.u(B, i) for i, a in lifted.owner.items() if a == B), Fraction(0))
        assert got >= floor
