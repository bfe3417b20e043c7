"""Flood-based route discovery: protocols, offline oracles, simulator."""

from .topo import (
    ChangeRecord, Graph, GraphError, GraphParseError, LinkQuality,
    format_graph_text, gen_complete, gen_mesh, gen_random,
    gen_random_connected, load_graph, mutate, parse_graph_text,
)
from .routecalc import (
    Rem, Route, apply_disjoint_penalty, classify_routes, contains_route,
    coverage, enumerate_routes, maximal_branches, route_rem,
    shortest_route_oracle, similarity, simplify, subcycle_count, tpmask,
)
from .qspn_core import (
    NodeState, Packet, RouteMapEntry, absorb, extract_routes, is_interesting,
)
from .simengine import RunResult, SimConfig, Simulation, delivery_delay, mean_flux, run

__all__ = [name for name in dir() if not name.startswith("_")]
