import pytest

from qspnsim.topo import Graph, LinkQuality


def build_graph(n, edges, qualities=None):
    links = {}
    for e in edges:
        u, v = e
        q = (qualities or {}).get(e, LinkQuality())
        links[(min(u, v), max(u, v))] = q
    return Graph(n, links)


@pytest.fixture
def fig2():
    """Four-cycle 0-1-3-2-0 with pendant 4 on 3 (the worked enumeration graph)."""
    return build_graph(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)])


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def segment6():
    return build_graph(6, [(i, i + 1) for i in range(5)])


@pytest.fixture
def fig8():
    """Three four-cycles chained at junctions 0, 3, 6, 9, plus tail node 10.

    0-(1|2)-3-(4|5)-6-(7|8)-9-10.  The tail makes node 9's far side a
    reflecting extreme, which is what produces the bounced return wave.
    """
    return build_graph(11, [(0, 1), (0, 2), (1, 3), (2, 3),
                            (3, 4), (3, 5), (4, 6), (5, 6),
                            (6, 7), (6, 8), (7, 9), (8, 9),
                            (9, 10)])


# Fig. 2 enumeration golden: the 13 expected maximal branches,
# with node letters A..E mapped to ids 0..4.
FIG2_ROUTES = {
    (0, 1, 3, 2),        # A B D C
    (0, 1, 3, 4),        # A B D E
    (0, 2, 3, 1),        # A C D B
    (0, 2, 3, 4),        # A C D E
    (1, 0, 2, 3, 4),     # B A C D E
    (1, 3, 2, 0),        # B D C A
    (1, 3, 4),           # B D E
    (2, 0, 1, 3, 4),     # C A B D E
    (2, 3, 1, 0),        # C D B A
    (2, 3, 4),           # C D E
    (3, 1, 0, 2),        # D B A C
    (3, 2, 0, 1),        # D C A B
    (3, 4),              # D E
}

FIG2_TPS = {
    (0, 1, 3, 2, 0, 1, 3, 4),   # A B D C A B D E
    (0, 2, 3, 1, 0, 2, 3, 4),   # A C D B A C D E
}
