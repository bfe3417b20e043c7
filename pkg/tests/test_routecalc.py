import math
from itertools import combinations, permutations

import pytest
from hypothesis import given, strategies as st

from qspnsim.routecalc import (
    Rem, apply_disjoint_penalty, classify_routes, contains_route, coverage,
    enumerate_routes, maximal_branches, route_rem, shortest_route_oracle,
    similarity, simplify, subcycle_count, tpmask,
)
from qspnsim.topo import Graph, LinkQuality, gen_complete, gen_mesh, gen_random_connected

from conftest import FIG2_ROUTES, FIG2_TPS, build_graph


# -- enumeration ------------------------------------------------------------

class TestEnumerate:
    def test_fig2_thirteen_routes(self, fig2):
        assert enumerate_routes(fig2) == FIG2_ROUTES

    def test_single_edge(self):
        g = build_graph(2, [(0, 1)])
        assert enumerate_routes(g) == {(0, 1), (1, 0)}

    def test_triangle_by_hand_execution(self, triangle):
        # hand-run of the recursive walk: six maximal branches, two per origin
        assert enumerate_routes(triangle) == {
            (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
        }

    def test_disconnected_components(self):
        g = build_graph(4, [(0, 1), (2, 3)])
        assert enumerate_routes(g) == {(0, 1), (1, 0), (2, 3), (3, 2)}

    def test_branches_are_simple(self, fig2):
        for n in fig2.nodes():
            for r in maximal_branches(fig2, n):
                assert len(set(r)) == len(r)

    def test_branches_are_maximal(self, fig2):
        for n in fig2.nodes():
            for r in maximal_branches(fig2, n):
                assert all(nb in r for nb in fig2.neighbors(r[-1]))

    @pytest.mark.parametrize("seed", range(6))
    def test_pair_coverage_via_branches(self, seed):
        # every ordered pair (u, v) is witnessed by some maximal branch from u
        g = gen_random_connected(7, 0.4, seed=seed)
        for u in g.nodes():
            branches = maximal_branches(g, u)
            for v in g.nodes():
                if v != u:
                    assert any(v in r for r in branches)


# -- simplification -----------------------------------------------------------

class TestSimplify:
    def test_fig2_golden_pair(self, fig2):
        assert simplify(enumerate_routes(fig2)) == FIG2_TPS

    def test_fig2_coverage(self, fig2):
        tps = simplify(enumerate_routes(fig2))
        assert coverage(tps, FIG2_ROUTES) == []

    def test_contained_route_absorbed(self):
        # A->B->D->E carries D->E on its own
        assert simplify({(0, 1, 3, 4), (3, 4)}) == {(0, 1, 3, 4)}

    def test_overlap_merge(self):
        # ABCDE + CDEKRE => ABCDEKRE, on a graph shaped to make it valid
        a = (0, 1, 2, 3, 4)
        b = (2, 3, 4, 5, 6, 4)
        assert simplify({a, b}) == {(0, 1, 2, 3, 4, 5, 6, 4)}

    def test_segment_end_to_end(self, segment6):
        tps = simplify(enumerate_routes(segment6))
        assert tps == {(0, 1, 2, 3, 4, 5), (5, 4, 3, 2, 1, 0)}

    def test_triangle_pivot_form(self, triangle):
        routes = enumerate_routes(triangle)
        tps = simplify(routes)
        assert len(tps) == 2
        for tp in tps:
            # pivot form: wing + pivot + same wing
            assert len(tp) == 5 and tp[:2] == tp[3:]
        assert coverage(tps, routes) == []

    def test_never_emits_immediate_reversal(self, fig2, segment6):
        for g in (fig2, segment6):
            for tp in simplify(enumerate_routes(g)):
                assert all(tp[i] != tp[i + 2] for i in range(len(tp) - 2))

    @pytest.mark.parametrize("seed", range(8))
    def test_coverage_on_random_graphs(self, seed):
        g = gen_random_connected(5, 0.5, seed=100 + seed)
        routes = enumerate_routes(g)
        tps = simplify(routes)
        assert coverage(tps, routes) == []
        for tp in tps:
            assert all(tp[i] != tp[i + 2] for i in range(len(tp) - 2))

    @pytest.mark.parametrize("seed", [None, 0, 1, 2, 3])
    def test_reverse_route_coverage(self, fig2, seed):
        # each covered route's reverse is also covered, except reverses that
        # are leaf-to-interior branches (redundant under the enumeration rule)
        g = fig2 if seed is None else gen_random_connected(5, 0.5, seed=300 + seed)
        routes = enumerate_routes(g)
        tps = simplify(routes)
        for r in routes:
            rev = tuple(reversed(r))
            if len(rev) > 1 and g.degree(rev[0]) == 1 and g.degree(rev[-1]) > 1:
                continue
            assert any(contains_route(tp, rev) for tp in tps)


class TestContainsRoute:
    def test_direct_substring(self):
        assert contains_route((0, 1, 3, 2, 0, 1, 3, 4), (3, 4))

    def test_reverse_not_granted(self):
        # terminal hop reads are not reversible in symmetric mode
        assert not contains_route((0, 1, 3, 2, 0, 1, 3, 4), (4, 3, 1))

    def test_identity(self):
        assert contains_route((7, 8, 9), (7, 8, 9))

    def test_all_fig2_routes_in_golden_pair(self):
        for r in FIG2_ROUTES:
            assert any(contains_route(tp, r) for tp in FIG2_TPS)

    def test_cycle_skip_implied_subroute(self):
        # body X(c..c)Y still carries XcY: 1,2,3,A,B,C,D,A,9: implies 1,2,3,A,9
        body = (1, 2, 3, 10, 11, 12, 13, 10, 9)
        assert contains_route(body, (1, 2, 3, 10, 9))

    def test_not_contained(self):
        assert not contains_route((0, 1, 2), (0, 2))


# -- REM arithmetic -----------------------------------------------------------

class TestRem:
    def test_single_hop(self):
        g = build_graph(2, [(0, 1)], {(0, 1): LinkQuality(2.0, 5.0)})
        assert route_rem((0, 1), g) == Rem(2.0, 5.0)

    def test_sum_and_min(self):
        g = build_graph(3, [(0, 1), (1, 2)],
                        {(0, 1): LinkQuality(1.0, 4.0), (1, 2): LinkQuality(3.0, 2.0)})
        assert route_rem((0, 1, 2), g) == Rem(4.0, 2.0)

    def test_unit_cost_length(self):
        g = gen_mesh(1, 6)
        assert route_rem(tuple(range(6)), g).trtt == 5.0

    def test_trivial_route(self):
        g = gen_complete(2)
        r = route_rem((0,), g)
        assert r.trtt == 0.0 and r.bw == math.inf

    def test_broken_hop_pair_rejected(self):
        g = build_graph(3, [(0, 1)])
        with pytest.raises(Exception):
            route_rem((0, 1, 2), g)

    @given(st.lists(st.tuples(st.floats(0.1, 10), st.floats(0.1, 10)),
                    min_size=1, max_size=8),
           st.integers(min_value=1, max_value=7))
    def test_concat_laws(self, quals, cut):
        # trtt adds and bw mins under concatenation, for any split point
        n = len(quals) + 1
        g = build_graph(n, [(i, i + 1) for i in range(n - 1)],
                        {(i, i + 1): LinkQuality(r, b) for i, (r, b) in enumerate(quals)})
        route = tuple(range(n))
        cut = min(cut, n - 1)
        head, tail = route[:cut + 1], route[cut:]
        whole = route_rem(route, g)
        h, t = route_rem(head, g), route_rem(tail, g)
        assert whole.trtt == pytest.approx(h.trtt + t.trtt)
        assert whole.bw == min(h.bw, t.bw)


# -- similarity and penalty ----------------------------------------------------

class TestSimilarity:
    def test_identical_routes(self):
        assert similarity((0, 1, 2, 3), (0, 1, 2, 3)) == 1.0

    def test_disjoint_intermediates(self):
        assert similarity((0, 1, 2, 9), (0, 3, 4, 9)) == 0.0

    def test_worked_example_19_of_22(self):
        # S b c f G1..G19 D  vs  S r t e G1..G19 D
        shared = tuple(range(100, 119))  # 19 shared intermediate hops
        r = (0, 1, 2, 3) + shared + (99,)
        s = (0, 4, 5, 6) + shared + (99,)
        assert similarity(r, s) == pytest.approx(19 / 22)

    def test_trivial_routes(self):
        assert similarity((0,), (0,)) == 0.0
        assert similarity((0, 1), (0, 1)) == 1.0
        assert similarity((0, 1), (0, 2)) == 0.0

    @given(st.lists(st.integers(0, 9), min_size=2, max_size=6, unique=True),
           st.lists(st.integers(0, 9), min_size=2, max_size=6, unique=True))
    def test_bounds_and_symmetry(self, r, s):
        v = similarity(tuple(r), tuple(s))
        assert 0.0 <= v <= 1.0
        assert v == similarity(tuple(s), tuple(r))


class TestPenalty:
    def test_equal_routes_zero_out(self):
        assert apply_disjoint_penalty(10.0, 1.0, 2.0) == 0.0

    def test_arithmetic(self):
        assert apply_disjoint_penalty(10.0, 0.6, 2.0) == pytest.approx(2.0)

    def test_bad_coefficient(self):
        with pytest.raises(ValueError):
            apply_disjoint_penalty(1.0, 0.5, 0.0)


# -- classes, subcycles, oracle -------------------------------------------------

class TestClasses:
    def test_positions(self):
        classes = classify_routes(9, 4)
        assert classes[0] == 1      # position 1
        assert classes[4] == 2      # position 5
        assert classes[8] == 3      # position 9

    @given(st.integers(1, 50), st.integers(1, 10))
    def test_monotone(self, n, c):
        classes = classify_routes(n, c)
        assert classes == sorted(classes)
        assert all(b - a in (0, 1) for a, b in zip(classes, classes[1:]))


def brute_force_cycle_count(n):
    """Count distinct cycles in K_n by canonicalizing vertex arrangements."""
    total = 0
    for k in range(3, n + 1):
        for sub in combinations(range(n), k):
            seen = set()
            for perm in permutations(sub):
                i = perm.index(min(perm))
                rot = perm[i:] + perm[:i]
                rev = (rot[0],) + tuple(reversed(rot[1:]))
                seen.add(min(rot, rev))
            total += len(seen)
    return total


class TestSubcycles:
    # first values hand-checked: K3 has the single triangle; K4 has 4
    # triangles + 3 four-cycles = 7; K5: 10 + 15 + 12 = 37
    @pytest.mark.parametrize("n,expected", [(3, 1), (4, 7), (5, 37), (6, 197)])
    def test_against_brute_force(self, n, expected):
        assert brute_force_cycle_count(n) == expected
        assert subcycle_count(n) == expected

    def test_below_three(self):
        assert subcycle_count(2) == 0
        assert subcycle_count(0) == 0


class TestShortestOracle:
    def test_mesh_corner_to_corner(self):
        g = gen_mesh(2, 2)
        assert shortest_route_oracle(g, 0, 3).trtt == 2.0

    def test_src_is_dst(self):
        g = gen_complete(3)
        assert shortest_route_oracle(g, 1, 1).trtt == 0.0

    def test_fig2_a_to_e(self, fig2):
        # exhaustive check: best of all simple paths 0->4
        best = min(route_rem(r, fig2).trtt
                   for u in [0]
                   for r in _all_paths(fig2, 0, 4))
        assert best == 3.0
        assert shortest_route_oracle(fig2, 0, 4).trtt == 3.0

    def test_unreachable(self):
        g = build_graph(3, [(0, 1)])
        assert shortest_route_oracle(g, 0, 2) is None

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_exhaustive_search(self, seed):
        g = gen_random_connected(6, 0.5, seed=200 + seed,
                                 quality=LinkQuality(1.0, 1.0))
        for src in g.nodes():
            for dst in g.nodes():
                if src == dst:
                    continue
                expect = min(route_rem(p, g).trtt for p in _all_paths(g, src, dst))
                assert shortest_route_oracle(g, src, dst).trtt == expect


def _all_paths(g, src, dst):
    out, stack = [], [(src, (src,))]
    while stack:
        node, path = stack.pop()
        if node == dst:
            out.append(path)
            continue
        for nb in g.neighbors(node):
            if nb not in path:
                stack.append((nb, path + (nb,)))
    return out


class TestTpmask:
    def test_popcount(self):
        assert bin(tpmask((1, 5, 9))).count("1") == 3

    def test_duplicate_hops_collapse(self):
        assert tpmask((1, 2, 1)) == tpmask((1, 2))
