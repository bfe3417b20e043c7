"""Deterministic event-driven execution of flood protocols.

One simulation is one single-threaded run over a stable (time, seq) priority
queue: events at equal virtual times execute in insertion order, so identical
inputs always yield byte-identical traces.  Delivery latency is half the link
rtt (stored values are round trips); the optional rtt-delay rule adds a
forwarding delay inversely proportional to the link bandwidth so packets keep
arriving in efficiency order on heterogeneous links.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import etp as etp_mod
from .qspn_core import (
    ATP, CTP, DEATH, ETP_KIND, PLAIN, QCLOSE, QOPEN,
    HandlerResult, NodeState, Packet, handle_atp, handle_ctp, handle_plain_tp,
    originate_flood,
)
from .qspn_v1 import V1State, handle_qclose, handle_qopen, originate_qclose
from .routecalc import Route
from .topo import Graph, LinkQuality, mutate

PROTOCOLS = ("plain", "atp", "ctp", "q2", "q1", "etp-scenario")


@dataclass
class SimConfig:
    max_routes: int = 1
    max_stored: int | None = None
    mode: str = "sym"                   # sym | asym
    rtt_delay: bool = False
    c_delay: float = 1.0
    efficiency: str = "rtt"
    penalty_enabled: bool = False
    penalty_k: float = 2.0
    step_cap: int = 1_000_000
    seed: int = 0
    ctp_acyclic: bool = False           # raw ctp runs only: add the acyclic rule
    record_trace: bool = True


def delivery_delay(link: LinkQuality, config: SimConfig) -> float:
    """One-way latency for a hop: rtt/2, plus c_delay/bw when rtt-delay is on."""
    d = link.rtt / 2.0
    if config.rtt_delay:
        d += config.c_delay / link.bw
    return d


@dataclass(frozen=True)
class TraceRecord:
    time: float
    kind: str
    src: int
    dst: int
    hops: Route
    interesting: bool

    def line(self) -> str:
        body = ">".join(str(h) for h in self.hops)
        return (f"{self.time:.6f} {self.kind} {self.src} {self.dst} "
                f"{body} {int(self.interesting)}")


@dataclass
class PhaseStats:
    index: int
    phi: dict[int, int]
    deliveries: int = 0
    start_time: float = 0.0
    end_time: float = 0.0

    def phi_m(self, nodes) -> float:
        return mean_flux(self.phi, nodes)


def mean_flux(phi: dict[int, int], nodes) -> float:
    """Arithmetic mean of per-node flux over the given nodes."""
    nodes = list(nodes)
    if not nodes:
        raise ValueError("mean flux over an empty node set")
    return sum(phi.get(n, 0) for n in nodes) / len(nodes)


@dataclass
class RunResult:
    quiesced: bool
    graph: Graph
    states: dict[int, NodeState]
    flux: dict[int, int]
    phases: list[PhaseStats]
    trace: list[TraceRecord]
    deliveries_to: dict[int, int]
    accepted_to: dict[int, int]
    completed_routes: dict[int, set[Route]]
    completion_time: float
    steps: int

    def phi_m(self) -> float:
        return mean_flux(self.flux, self.graph.nodes())

    def trace_text(self) -> str:
        return "\n".join(rec.line() for rec in self.trace) + "\n"


class Simulation:
    """One deterministic run: graph, protocol, starters, optional mutations.

    Mutation entries are dicts {"at": when, "kind": k, ...args}; `at` is a
    virtual time, "after-quiescence" (wait for the queue to drain), or
    "with-previous" (join the previous entry's phase so a batch of changes
    injects its repair floods at one instant).
    """

    def __init__(self, graph: Graph, protocol: str, starters,
                 config: SimConfig | None = None, mutations=None,
                 initial_states: dict[int, NodeState] | None = None):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        self.graph = graph
        self.protocol = protocol
        self.starters = sorted(starters)
        self.config = config or SimConfig()
        self.q2_enabled = protocol in ("q2", "etp-scenario")
        # a re-exploration continues from previously converged maps
        self.states: dict[int, NodeState] = initial_states or {
            n: self._new_state(n) for n in range(graph.node_count)}
        for n in range(graph.node_count):
            self.states.setdefault(n, self._new_state(n))
        self.v1_states: dict[int, V1State] = {
            n: V1State() for n in range(graph.node_count)}
        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.steps = 0
        self.flux: dict[int, int] = {}
        self.deliveries_to: dict[int, int] = {}
        self.accepted_to: dict[int, int] = {}
        self.completed: dict[int, set[Route]] = {}
        self.trace: list[TraceRecord] = []
        self.phases: list[PhaseStats] = []
        self._phase = PhaseStats(0, {})
        self.timed_changes: list[tuple[float, dict]] = []
        self.quiescence_phases: list[list[dict]] = []
        self._split_mutations(mutations or [])

    def _new_state(self, n: int) -> NodeState:
        c = self.config
        return NodeState(n, max_routes=c.max_routes, max_stored=c.max_stored,
                         mode=c.mode, efficiency_measure=c.efficiency,
                         penalty_enabled=c.penalty_enabled, penalty_k=c.penalty_k)

    def _split_mutations(self, mutations):
        for entry in mutations:
            entry = dict(entry)
            at = entry.pop("at", "after-quiescence")
            if at == "after-quiescence":
                self.quiescence_phases.append([entry])
            elif at == "with-previous":
                if not self.quiescence_phases:
                    raise ValueError("'with-previous' without a previous entry")
                self.quiescence_phases[-1].append(entry)
            else:
                self.timed_changes.append((float(at), entry))
        for t, entry in sorted(self.timed_changes, key=lambda te: te[0]):
            self._push(t, ("mutate", entry))

    # -- scheduling --------------------------------------------------------

    def _push(self, time: float, item):
        heapq.heappush(self.heap, (time, self.seq, item))
        self.seq += 1

    def _send(self, time: float, packet: Packet, src: int, dst: int):
        self._push(time, ("pkt", packet, src, dst))

    def _schedule_sends(self, node: int, sends, at_time: float):
        distinct = {id(p) for _, p in sends}
        if distinct:
            self.flux[node] = self.flux.get(node, 0) + len(distinct)
            self._phase.phi[node] = self._phase.phi.get(node, 0) + len(distinct)
        for nb, pkt in sends:
            q = self.graph.quality(node, nb)
            self._send(at_time + delivery_delay(q, self.config), pkt, node, nb)

    # -- protocol entry points ----------------------------------------------

    def _inject_starters(self):
        kind = {"plain": PLAIN, "atp": ATP, "ctp": CTP,
                "q2": CTP, "etp-scenario": CTP, "q1": QCLOSE}[self.protocol]
        for s in self.starters:
            if not self.graph.alive[s]:
                raise ValueError(f"starter {s} is not alive")
            state = self.states[s]
            pkt = (originate_qclose(state) if kind == QCLOSE
                   else originate_flood(state, kind))
            sends = [(nb, pkt) for nb in self.graph.neighbors(s)]
            self._schedule_sends(s, sends, 0.0)

    def _dispatch(self, packet: Packet, src: int, dst: int,
                  arrival: LinkQuality, neighbors) -> HandlerResult:
        state = self.states[dst]
        k = packet.kind
        if k == PLAIN:
            return handle_plain_tp(state, packet, src, arrival, neighbors)
        if k == ATP:
            return handle_atp(state, packet, src, arrival, neighbors)
        if k == CTP:
            return handle_ctp(state, packet, src, arrival, neighbors,
                              q2_enabled=self.q2_enabled,
                              acyclic=self.config.ctp_acyclic)
        if k == QCLOSE:
            return handle_qclose(state, self.v1_states[dst], packet, src,
                                 arrival, neighbors, self.graph)
        if k == QOPEN:
            return handle_qopen(state, self.v1_states[dst], packet, src,
                                arrival, neighbors, self.graph)
        if k == ETP_KIND:
            return etp_mod.on_etp_receive(state, packet, src, arrival,
                                          neighbors, self.graph)
        if k == DEATH:
            return etp_mod.handle_death_tp(state, packet, src, arrival,
                                           neighbors)
        raise ValueError(f"undeliverable packet kind {k!r}")

    # -- mutations -----------------------------------------------------------

    def _apply_change(self, entry: dict):
        entry = dict(entry)
        kind = entry.pop("kind")
        self.graph, record = mutate(self.graph, kind, **entry)
        if kind in ("worsen_link", "break_link"):
            ckind = "worsen" if kind == "worsen_link" else "break"
            for me, other in ((record.u, record.v), (record.v, record.u)):
                sends = etp_mod.on_link_worsened(
                    self.states[me], other, record.old, record.new,
                    self.graph, ckind)
                self._schedule_sends(me, sends, self.now)
        elif kind in ("improve_link", "new_link"):
            ckind = "improve" if kind == "improve_link" else "new"
            for me, other in ((record.u, record.v), (record.v, record.u)):
                sends = etp_mod.on_link_improved(
                    self.states[me], other, record.new, self.graph, ckind)
                self._schedule_sends(me, sends, self.now)
        elif kind == "kill_node":
            for nb, _q in record.links:
                sends = etp_mod.on_node_death(self.states[nb], record.u,
                                              self.graph)
                self._schedule_sends(nb, sends, self.now)
        elif kind == "add_node":
            state = self._new_state(record.u)
            self.states[record.u] = state
            self.v1_states[record.u] = V1State()
            neighbor_states = {nb: self.states[nb] for nb, _q in record.links}
            sends = etp_mod.on_node_join(state, neighbor_states, self.graph)
            self._schedule_sends(record.u, sends, self.now)

    # -- main loop -------------------------------------------------------------

    def _drain(self) -> bool:
        """Process events until the queue empties; False if the cap tripped."""
        while self.heap:
            if self.steps >= self.config.step_cap:
                return False
            time, _seq, item = heapq.heappop(self.heap)
            self.now = max(self.now, time)
            if item[0] == "mutate":
                self._apply_change(item[1])
                continue
            _tag, packet, src, dst = item
            self.steps += 1
            self._phase.deliveries += 1
            if (not self.graph.alive[dst] or not self.graph.alive[src]
                    or not self.graph.has_link(src, dst)):
                continue  # lost in flight across a mutation
            arrival = self.graph.quality(src, dst)
            neighbors = self.graph.neighbors(dst)
            result = self._dispatch(packet, src, dst, arrival, neighbors)
            self.deliveries_to[dst] = self.deliveries_to.get(dst, 0) + 1
            if result.accepted:
                self.accepted_to[dst] = self.accepted_to.get(dst, 0) + 1
            if result.completed_route is not None:
                origin = result.completed_route[0]
                self.completed.setdefault(origin, set()).add(
                    result.completed_route)
            if self.config.record_trace:
                self.trace.append(TraceRecord(time, packet.kind, src, dst,
                                              packet.hops(),
                                              result.interesting))
            self._schedule_sends(dst, result.sends, time)
        return True

    def _close_phase(self):
        self._phase.end_time = self.now
        self.phases.append(self._phase)
        self._phase = PhaseStats(len(self.phases), {}, start_time=self.now)

    def run(self) -> RunResult:
        self._inject_starters()
        quiesced = True
        while True:
            ok = self._drain()
            for st in self.states.values():
                st.purge_unreachable()
            self._close_phase()
            if not ok:
                quiesced = False
                break
            if not self.quiescence_phases:
                break
            batch = self.quiescence_phases.pop(0)
            for entry in batch:
                self._apply_change(entry)
        return RunResult(
            quiesced=quiesced, graph=self.graph, states=self.states,
            flux=self.flux, phases=self.phases, trace=self.trace,
            deliveries_to=self.deliveries_to, accepted_to=self.accepted_to,
            completed_routes=self.completed, completion_time=self.now,
            steps=self.steps)


def run(graph: Graph, protocol: str, starters, config: SimConfig | None = None,
        mutations=None, initial_states=None) -> RunResult:
    """Build and execute one simulation; see Simulation for the contract."""
    return Simulation(graph, protocol, starters, config, mutations,
                      initial_states).run()
