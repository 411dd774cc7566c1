import io
from fractions import Fraction

import pytest

from conftest import tiny
from models.instance import Allocation
from models.layered import (
    LSOURCE,
    SOURCE_MARK,
    FractionalSolution,
    InfeasibilityCertificate,
    LightTuple,
    item_copy,
    light_copy,
)
from tools.flow_network import assign_private_items, forest_from_allocation, layerize
from tools.generators import gen_gap_followup, gen_gap_instance
from tools.layered_lp import (
    TERM,
    build_layered_graph,
    build_lp,
    decompose_paths,
    dump_lp,
    enumerate_tuples,
    inject_forest,
    solve_lp,
)
from utils.errors import GuardExceeded, PreconditionError

TOP = LightTuple(1, (1,))
FED = LightTuple(1, (1, SOURCE_MARK))


def tiny_model(N: int = 2, h: int = 1):
    ci = tiny(N)
    pa = assign_private_items(ci)
    return ci, pa, build_lp(build_layered_graph(ci, pa, h))


def test_layered_graph_shape(tiny_canonical):
    lg = build_layered_graph(tiny_canonical, assign_private_items(tiny_canonical), 2)
    assert sorted(lg.levels) == [(1, 1), (2, 1), (2, 2)]
    assert lg.levels[(1, 1)].has_edge(LSOURCE, item_copy(1, 1, 1))
    assert lg.levels[(1, 1)].has_edge(item_copy(1, 1, 2), light_copy(1, 1, 1))
    assert lg.terminals == [0]
    with pytest.raises(PreconditionError):
        build_layered_graph(tiny_canonical, assign_private_items(tiny_canonical), 0)


def test_tuples_of_one_layer():
    ci, pa, _ = tiny_model()
    tree = enumerate_tuples(build_layered_graph(ci, pa, 1), 1000)
    assert tree == {TOP: [FED], FED: []}


def test_feasible_lp():
    _, _, model = tiny_model()
    assert model.tuples == [TOP, FED]
    assert set(model.family_counts()) >= {"term", "xout", "xa", "yprop", "route", "cap"}

    fsol = solve_lp(model)
    assert isinstance(fsol, FractionalSolution)
    assert fsol.x(1, 1) == pytest.approx(1.0)
    assert fsol.y(TOP) == pytest.approx(1.0)
    # a level-0 amount carries N units
    assert fsol.y(FED) == pytest.approx(2.0)


def test_infeasible_lp_certificate():
    _, _, model = tiny_model(N=3)
    cert = solve_lp(model)
    assert isinstance(cert, InfeasibilityCertificate)
    assert cert.status == "infeasible"
    assert cert.violation > 0
    assert cert.strongest()


def test_integral_solution_is_a_point():
    ci, pa, model = tiny_model()
    forest, _ = forest_from_allocation(ci, pa, Allocation({0: 0, 1: 1, 2: 1}))
    forest, level = layerize(ci, forest, 1)
    values = inject_forest(model, forest, level)
    assert model.violations(values) == []
    assert values[model.index[("y", FED)]] == Fraction(2)


def test_decompose_paths():
    _, _, model = tiny_model()
    decomposition = decompose_paths(solve_lp(model))
    term = decomposition.paths[TERM]
    assert len(term) == 1
    assert term[0][1] == pytest.approx(1.0)
    fed = decomposition.paths[FED]
    assert len(fed) == 2
    assert all(nodes[0] == LSOURCE and nodes[-1] == light_copy(1, 1, 1) for nodes, _ in fed)
    assert sum(f for _, f in fed) == pytest.approx(2.0)


def test_size_guard():
    ci, pa, _ = tiny_model()
    with pytest.raises(GuardExceeded):
        build_lp(build_layered_graph(ci, pa, 1), guard=1)


def test_dump_lp():
    _, _, model = tiny_model()
    out = io.StringIO()
    dump_lp(model, out)
    text = out.getvalue()
    assert text.startswith("\\ layered")
    assert "Subject To" in text
    assert " term_0: " in text
    assert "Bounds" in text
    assert " <= 2\n" in text
    assert text.endswith("End\n")


def test_gap_instance_lp_is_feasible():
    ci, pa = gen_gap_instance(2)
    model = build_lp(build_layered_graph(ci, pa, 2))
    assert isinstance(solve_lp(model), FractionalSolution)


def test_gap_followup_has_no_point():
    ci, pa = gen_gap_followup(2)
    model = build_lp(build_layered_graph(ci, pa, 2))
    assert isinstance(solve_lp(model), InfeasibilityCertificate)
