import itertools
import math
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from sinkless.errors import FormatError, PreconditionError
from sinkless.graph_core import EdgeColouredGraph, generate_regular_high_girth, is_bipartite
from sinkless.problems import (EP_D_PLUS_1, FOUR_P_D, Assignment, LllInstance, Orientation, check_assignment,
                               check_lll_criterion, colour_from_orientation, dependency_graph, format_colouring,
                               format_lll, format_orientation, orient_from_colouring, parse_colouring,
                               parse_lll, parse_orientation, verify_colouring, verify_orientation)

from conftest import k4
from oracles import hand_orientation_sinks


def so_instance(nxg):
    """Sinkless orientation as an LLL instance: variable per edge (0 = low -> high)."""
    edges = sorted(tuple(sorted(e)) for e in nxg.edges())
    events = []
    for v in sorted(nxg.nodes()):
        idx = [i for i, e in enumerate(edges) if v in e]
        events.append((idx, [tuple(0 if edges[i][1] == v else 1 for i in idx)]))
    return LllInstance.build([(f"{a}-{b}", 2) for a, b in edges], events)


def test_directed_cycle_is_sinkless():
    g = EdgeColouredGraph.from_edges(6, 2, [(i, (i + 1) % 6) for i in range(6)])
    o = Orientation.from_arcs([(i, (i + 1) % 6) for i in range(6)])
    assert verify_orientation(g, o) == []


def test_star_inward_has_centre_sink():
    g = EdgeColouredGraph.from_edges(4, 3, [(0, 1), (0, 2), (0, 3)])
    o = Orientation.from_arcs([(1, 0), (2, 0), (3, 0)])
    assert verify_orientation(g, o) == [0]


def test_k4_tournament_with_loser():
    arcs = [(0, 3), (1, 3), (2, 3), (0, 1), (1, 2), (2, 0)]
    assert verify_orientation(k4(), Orientation.from_arcs(arcs)) == hand_orientation_sinks(4, arcs) == [3]


def test_verify_orientation_rejects_partial():
    with pytest.raises(PreconditionError):
        verify_orientation(k4(), Orientation.from_arcs([(0, 1)]))


def test_proper_colouring_is_sinkless():
    g = generate_regular_high_girth(20, 3, 4, seed=0)
    _, side = is_bipartite(g)
    assert verify_colouring(g, side) == []


def test_all_zero_colouring_flags_colour_zero_edges(host20):
    bad = verify_colouring(host20, [0] * 20)
    assert bad == [e for e, c in zip(host20.edges, host20.colours) if c == 0]


def test_hand_built_colouring():
    # K_{3,3} with left 0,1,2 and right 3,4,5; colour (i + j) % 3 on edge (i, 3 + j)
    edges = [(i, 3 + j) for i in range(3) for j in range(3)]
    colours = [(i + j) % 3 for i in range(3) for j in range(3)]
    g = EdgeColouredGraph.from_edges(6, 3, edges, colours)
    phi = [1, 2, 0, 2, 1, 1]
    # by hand: (0,4) has colour 1 and phi 1,1; (1,5) has colour 0 but phi 2,1; (2,5) has colour 1 but phi 0
    assert verify_colouring(g, phi) == [(0, 4)]


def test_bridges_on_fixed_instance(host20):
    _, side = is_bipartite(host20)
    assert verify_orientation(host20, orient_from_colouring(host20, side)) == []
    heads = {}
    # orient every edge from the left part to the right part and flip colour-0 edges: everyone has an out-edge
    for (u, v), c in zip(host20.edges, host20.colours):
        heads[(u, v)] = u if c == 0 else v
    o = Orientation(heads)
    assert verify_orientation(host20, o) == []
    assert verify_colouring(host20, colour_from_orientation(host20, o)) == []


def test_dependency_graph_shapes():
    disjoint = LllInstance.build([("a", 2), ("b", 2)], [([0], [(0,)]), ([1], [(1,)])])
    assert dependency_graph(disjoint).number_of_edges() == 0
    chain = LllInstance.build([(f"x{i}", 2) for i in range(4)],
                              [([i, i + 1], [(0, 0)]) for i in range(3)] + [([3], [])])
    assert nx.is_isomorphic(dependency_graph(chain), nx.path_graph(4))


def test_criterion_four_regular_tight():
    inst = so_instance(nx.random_regular_graph(4, 12, seed=1))
    verdict = check_lll_criterion(inst, lambda d: 16)
    assert verdict.p == Fraction(1, 16) and verdict.d == 4
    assert verdict.lhs == 1 and verdict.margin == 0 and verdict.ok


def test_criterion_three_regular_fails_e_form():
    inst = so_instance(nx.petersen_graph())
    verdict = check_lll_criterion(inst, EP_D_PLUS_1)
    assert verdict.p == Fraction(1, 8) and verdict.d == 3
    assert not verdict.ok and verdict.lhs == pytest.approx(math.e / 2)
    assert check_lll_criterion(inst, FOUR_P_D).lhs == Fraction(3, 2)


def test_criterion_no_bad_tuples():
    inst = LllInstance.build([("a", 3)], [([0], [])])
    verdict = check_lll_criterion(inst, FOUR_P_D)
    assert verdict.p == 0 and verdict.ok


def test_criterion_rejects_unknown():
    with pytest.raises(PreconditionError):
        check_lll_criterion(LllInstance.build([], []), "nonsense")


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_probability_matches_enumeration(data):
    k = data.draw(st.integers(1, 4))
    sizes = [data.draw(st.integers(1, 4)) for _ in range(k)]
    vars_ = data.draw(st.lists(st.integers(0, k - 1), min_size=1, max_size=k, unique=True))
    domain = list(itertools.product(*[range(sizes[x]) for x in vars_]))
    bad = data.draw(st.lists(st.sampled_from(domain), max_size=len(domain)))
    inst = LllInstance.build([(f"v{i}", s) for i, s in enumerate(sizes)], [(vars_, bad)])
    total = hits = 0
    for full in itertools.product(*[range(s) for s in sizes]):
        total += 1
        hits += tuple(full[x] for x in vars_) in set(map(tuple, bad))
    assert inst.probability(0) == Fraction(hits, total)


def test_check_assignment_outcomes():
    inst = LllInstance.build([("a", 2), ("b", 2)], [([0, 1], [(1, 1)]), ([1], [(0,)])])
    assert check_assignment(inst, Assignment([0, 1]))
    verdict = check_assignment(inst, [{0: 0, 1: 1}, {1: 0}])
    assert not verdict and verdict.witness == (0, 1, 1)
    verdict = check_assignment(inst, Assignment([1, 1]))
    assert not verdict and verdict.reason == "bad event occurs" and verdict.witness == 0
    with pytest.raises(PreconditionError):
        check_assignment(inst, [{0: 0}, {1: 1}])


def test_lll_format_round_trip():
    inst = so_instance(nx.random_regular_graph(4, 8, seed=2))
    back = parse_lll(format_lll(inst, ["c"]))
    assert back == inst


@pytest.mark.parametrize("text,line", [
    ("variables 1\nx 2\nevents 1\n1 0 1\n2\n", 5),
    ("variables 1\nx 0\nevents 0\n", 2),
    ("variables 1\nx 2\nevent 1\n", 3),
    ("variables 1\nx 2\nevents 1\n2 0 1\n", 4),
])
def test_lll_format_errors(text, line):
    with pytest.raises(FormatError) as err:
        parse_lll(text)
    assert err.value.lineno == line


def test_orientation_and_colouring_formats():
    o = Orientation.from_arcs([(1, 0), (1, 2)])
    assert format_orientation(o) == "1 0\n1 2\n"
    assert parse_orientation(format_orientation(o)) == o
    assert parse_colouring(format_colouring([2, 0, 1], ["x"])).colour == (2, 0, 1)
    with pytest.raises(FormatError):
        parse_orientation("1 2 3\n")
