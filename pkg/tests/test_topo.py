import math

import pytest
from hypothesis import given, strategies as st

from qspnsim.topo import (
    Graph, GraphError, GraphParseError, LinkQuality, format_graph_text,
    gen_complete, gen_mesh, gen_random, inverse_mutation, mutate,
    parse_graph_text,
)


class TestGenerators:
    def test_complete_k3(self):
        g = gen_complete(3)
        assert g.node_count == 3
        assert len(g.links) == 3

    def test_complete_k1(self):
        g = gen_complete(1)
        assert g.node_count == 1 and len(g.links) == 0

    def test_complete_k10_link_count(self):
        assert len(gen_complete(10).links) == 45

    def test_complete_zero_rejected(self):
        with pytest.raises(GraphError):
            gen_complete(0)

    @given(st.integers(min_value=1, max_value=12))
    def test_complete_degree(self, k):
        g = gen_complete(k)
        assert all(g.degree(n) == k - 1 for n in range(k))

    def test_mesh_11x11(self):
        g = gen_mesh(11, 11)
        assert g.node_count == 121
        assert len(g.links) == 2 * 11 * 11 - 11 - 11  # = 220

    def test_mesh_1x2(self):
        g = gen_mesh(1, 2)
        assert g.node_count == 2 and len(g.links) == 1

    def test_mesh_2x2(self):
        g = gen_mesh(2, 2)
        assert g.node_count == 4 and len(g.links) == 4

    def test_mesh_zero_dim_rejected(self):
        with pytest.raises(GraphError):
            gen_mesh(0, 4)

    @given(st.integers(min_value=3, max_value=6), st.integers(min_value=3, max_value=6))
    def test_mesh_degree_profile(self, rows, cols):
        g = gen_mesh(rows, cols)
        degs = [g.degree(n) for n in range(g.node_count)]
        assert degs.count(2) == 4
        assert degs.count(3) == 2 * (rows - 2) + 2 * (cols - 2)
        assert degs.count(4) == (rows - 2) * (cols - 2)

    def test_random_p1_complete(self):
        g = gen_random(5, 1.0, seed=7)
        assert len(g.links) == 10

    def test_random_p0_empty(self):
        assert len(gen_random(5, 0.0, seed=7).links) == 0

    def test_random_deterministic(self):
        a = gen_random(8, 0.5, seed=42)
        b = gen_random(8, 0.5, seed=42)
        assert a == b
        c = gen_random(8, 0.5, seed=43)
        assert a != c  # overwhelmingly likely for this seed pair


class TestMutate:
    def test_worsen_records_old_new(self):
        g = gen_complete(3)
        g2, rec = mutate(g, "worsen_link", u=0, v=1, rtt=3.0)
        assert rec.old.rtt == 1.0 and rec.new.rtt == 3.0
        assert g2.quality(0, 1).rtt == 3.0
        assert g.quality(0, 1).rtt == 1.0  # original untouched

    def test_break_is_removal(self):
        g = gen_complete(3)
        g2, rec = mutate(g, "break_link", u=0, v=1)
        assert not g2.has_link(0, 1)
        assert rec.new is None and rec.old == LinkQuality()

    def test_new_link_from_nothing(self):
        g = gen_mesh(1, 3)
        g2, rec = mutate(g, "new_link", u=0, v=2, rtt=2.0, bw=4.0)
        assert g2.quality(0, 2) == LinkQuality(2.0, 4.0)
        assert rec.old is None

    def test_kill_node(self):
        g = gen_complete(4)
        g2, rec = mutate(g, "kill_node", node=2)
        assert not g2.alive[2]
        assert all(2 not in k for k in g2.links)
        assert len(rec.links) == 3

    def test_add_node(self):
        g = gen_complete(3)
        g2, rec = mutate(g, "add_node", links=[(0, 1.0, 1.0), (2, 2.0, 1.0)])
        assert g2.node_count == 4
        assert g2.quality(3, 2).rtt == 2.0
        assert rec.u == 3

    def test_missing_link_rejected(self):
        g = gen_mesh(1, 3)
        with pytest.raises(GraphError):
            mutate(g, "worsen_link", u=0, v=2, rtt=9.0)

    def test_worsen_must_worsen(self):
        g = gen_complete(3)
        with pytest.raises(GraphError):
            mutate(g, "worsen_link", u=0, v=1, rtt=0.5)

    @pytest.mark.parametrize("kind,args", [
        ("worsen_link", {"u": 0, "v": 1, "rtt": 5.0}),
        ("improve_link", {"u": 0, "v": 1, "rtt": 0.25}),
        ("break_link", {"u": 0, "v": 1}),
        ("new_link", {"u": 0, "v": 3, "rtt": 2.0, "bw": 3.0}),
    ])
    def test_mutate_then_inverse_is_identity(self, kind, args):
        g = gen_mesh(2, 2)
        g2, rec = mutate(g, kind, **args)
        inv_kind, inv_args = inverse_mutation(rec)
        g3, _ = mutate(g2, inv_kind, **inv_args)
        assert g3 == g


class TestTextFormat:
    def test_round_trip(self):
        g = gen_random(6, 0.6, seed=3, quality=LinkQuality(2.5, 4.0))
        assert parse_graph_text(format_graph_text(g)) == g

    def test_comments_and_blanks(self):
        text = "# header\nnodes 2\n\n0 1 1.5 2  # a link\n"
        g = parse_graph_text(text)
        assert g.quality(0, 1) == LinkQuality(1.5, 2.0)

    def test_parse_error_carries_line(self):
        with pytest.raises(GraphParseError) as err:
            parse_graph_text("nodes 2\n0 1 bogus 1\n")
        assert err.value.lineno == 2

    def test_missing_header(self):
        with pytest.raises(GraphParseError):
            parse_graph_text("0 1 1 1\n")


class TestGraphBasics:
    def test_no_self_loops(self):
        with pytest.raises(GraphError):
            Graph(2, {(1, 1): LinkQuality()})

    def test_connectivity(self):
        assert gen_mesh(3, 3).is_connected()
        assert not Graph(3, {(0, 1): LinkQuality()}).is_connected()

    def test_quality_validation(self):
        with pytest.raises(GraphError):
            LinkQuality(rtt=0.0)
        with pytest.raises(GraphError):
            LinkQuality(bw=-1.0)
        with pytest.raises(GraphError):
            LinkQuality(rtt=math.inf)
