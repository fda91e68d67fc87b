import networkx as nx
import pytest

from sinkless.graph_core import EdgeColouredGraph, bipartite_double_cover, generate_regular_high_girth, konig_edge_colour

K4_COLOURED = [(0, 1, 0), (2, 3, 0), (0, 2, 1), (1, 3, 1), (0, 3, 2), (1, 2, 2)]


def k4():
    return EdgeColouredGraph.from_edges(4, 3, [(u, v) for u, v, _ in K4_COLOURED],
                                        [c for _, _, c in K4_COLOURED])


def petersen():
    return EdgeColouredGraph.from_edges(10, 3, nx.petersen_graph().edges())


def desargues():
    return konig_edge_colour(bipartite_double_cover(petersen()))


@pytest.fixture(scope="session")
def desargues_graph():
    return desargues()


@pytest.fixture(scope="session")
def host20():
    return generate_regular_high_girth(20, 3, 6, seed=1)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, title, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {title}" + (f" [{detail}]" if detail else ""))
