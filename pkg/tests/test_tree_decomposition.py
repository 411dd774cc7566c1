from fractions import Fraction

import pytest

from models.trees import Tree
from tools.generators import gen_fractional_assignment
from tools.tree_decomposition import assign_tree, bs_decompose, bs_row_problems
from utils.errors import PreconditionError

HALF = Fraction(1, 2)


def test_shared_item_forms_one_tree():
    dec = bs_decompose([0, 1], [0], {0: HALF, 1: HALF}, {(0, 0): HALF, (1, 0): HALF})
    assert dec.matched == {}
    assert dec.trees == [Tree(frozenset({0, 1}), frozenset({0}), frozenset({(0, 0), (1, 0)}))]
    assert dec.trees[0].x_mass(dec.x) == 1


def test_cycle_is_cancelled_into_a_matching():
    y = {(0, 0): HALF, (0, 1): HALF, (1, 0): HALF, (1, 1): HALF}
    steps = []
    dec = bs_decompose([0, 1], [0, 1], {}, y, on_step=lambda step, x, y: steps.append(step))
    assert dec.trees == []
    assert sorted(dec.matched) == [0, 1]
    assert sorted(dec.matched.values()) == [0, 1]
    assert steps[0] == "start"
    assert "cycle" in steps


def test_leaf_item_is_fixed():
    dec = bs_decompose([0], [0], {0: HALF}, {(0, 0): HALF})
    assert dec.matched == {0: 0}
    assert dec.trees == []


def test_rows_are_checked():
    problems = bs_row_problems([0], [0], {0: HALF}, {(0, 0): Fraction(1)})
    assert problems == ["agent 0 is assigned 1, expected 1/2"]
    assert bs_row_problems([0, 1], [0], {}, {(0, 0): Fraction(1), (1, 0): Fraction(1)})[0] == (
        "item 0 is assigned 2 > 1"
    )
    with pytest.raises(PreconditionError):
        bs_decompose([0], [0], {0: HALF}, {(0, 0): Fraction(1)})


@pytest.mark.parametrize("seed", range(8))
def test_random_assignments_split_into_trees(seed):
    n_agents, n_items = 4 + seed, 6 + seed
    x, y = gen_fractional_assignment(n_agents, n_items, seed)
    assert bs_row_problems(range(n_agents), range(n_items), x, y) == []
    dec = bs_decompose(range(n_agents), range(n_items), x, y)

    in_trees = [a for tree in dec.trees for a in tree.agents]
    assert len(in_trees) == len(set(in_trees))
    assert set(in_trees) | set(dec.matched) == set(range(n_agents))
    assert not set(in_trees) & set(dec.matched)
    assert len(set(dec.matched.values())) == len(dec.matched)
    for tree in dec.trees:
        assert 2 * tree.x_mass(dec.x) > 1
        for i in tree.items:
            assert sum(1 for _, j in tree.edges if j == i) == 2


def test_assign_tree():
    # 0 - item 5 - 1 - item 6 - 2
    tree = Tree(frozenset({0, 1, 2}), frozenset({5, 6}), frozenset({(0, 5), (1, 5), (1, 6), (2, 6)}))
    assert assign_tree(tree, 0) == {1: 5, 2: 6}
    assert assign_tree(tree, 1) == {0: 5, 2: 6}
    with pytest.raises(PreconditionError):
        assign_tree(tree, 3)


@pytest.mark.slow
def test_rows_hold_at_every_step():
    for seed in range(300):
        n_agents, n_items = 1 + seed % 12, 1 + seed % 16
        x, y = gen_fractional_assignment(n_agents, n_items, seed)
        agents, items = list(range(n_agents)), list(range(n_items))
        broken = []

        def check(step, x_now, y_now):
            broken.extend(f"{step}: {p}" for p in bs_row_problems(agents, items, x_now, y_now))

        dec = bs_decompose(agents, items, x, y, on_step=check)
        assert broken == [], f"seed {seed}"
        for tree in dec.trees:
            # any agent may be the one left without an item
            for root in tree.agents:
                given = assign_tree(tree, root)
                assert set(given) == tree.agents - {root}
                assert sorted(given.values()) == sorted(tree.items)
                assert all(edge in tree.edges for edge in given.items())
