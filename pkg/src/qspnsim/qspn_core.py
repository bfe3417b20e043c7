"""Packet formats, per-node route maps, and flood forwarding semantics.

Handlers are transition functions: they take the receiving node's state and a
delivered packet, update the state, and return the copies to send next.  The
event engine owns scheduling; nothing here knows about virtual time.

Body convention: a tracer body is a sequence of entries (node, quality) where
`quality` is the quality of the link the packet traversed to *reach* that
node (None for the flood starter).  A receiver therefore reconstructs the rem
of every reverse route from its arrival link plus the recorded entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .routecalc import REM_EMPTY, Rem, Route, efficiency, similarity, tpmask
from .routecalc import PENALTY_THRESHOLD
from .topo import LinkQuality

# packet kinds
PLAIN = "plain"
ATP = "atp"
CTP = "ctp"
QCLOSE = "qclose"
QOPEN = "qopen"
ETP_KIND = "etp"
DEATH = "death"


@dataclass(frozen=True)
class BodyEntry:
    node: int
    quality: LinkQuality | None  # link traversed to reach `node`; None at origin


@dataclass(frozen=True)
class RouteRecord:
    """Map excerpt carried by extended packets: destination, value, hop set."""

    dst: int
    rem: Rem
    mask: int
    hops: Route  # full hop list so receivers can splice exactly


@dataclass(frozen=True)
class ChangeInfo:
    """Link or node change an extended packet announces."""

    kind: str                      # worsen|improve|break|new|death|join
    u: int
    v: int | None = None
    quality: LinkQuality | None = None  # None means the link is gone / node dead


@dataclass(frozen=True)
class Packet:
    kind: str
    body: tuple[BodyEntry, ...] = ()
    flood_id: tuple[int, int] | None = None     # plain TPs only
    starter: int | None = None                  # v1 floods: whose flood this is
    records: tuple[RouteRecord, ...] = ()       # extended packets
    change: ChangeInfo | None = None
    flag_of_interest: bool = False

    def hops(self) -> Route:
        return tuple(e.node for e in self.body)

    def appended(self, node: int, quality: LinkQuality | None) -> "Packet":
        return replace(self, body=self.body + (BodyEntry(node, quality),))


@dataclass
class RouteMapEntry:
    dst: int
    gateway: int
    rem: Rem
    mask: int
    hops: Route


@dataclass
class NodeState:
    """One node's protocol state; owned by a single simulation run."""

    node: int
    max_routes: int = 1
    max_stored: int | None = None
    mode: str = "sym"                 # sym | asym
    efficiency_measure: str = "rtt"
    penalty_enabled: bool = False
    penalty_k: float = 2.0
    route_map: dict[int, list[RouteMapEntry]] = field(default_factory=dict)
    seen_floods: set[tuple[int, int]] = field(default_factory=set)
    known_dead: set[int] = field(default_factory=set)
    flood_seq: int = 0

    @property
    def stored_limit(self) -> int:
        return self.max_stored if self.max_stored is not None else self.max_routes

    # -- map access -------------------------------------------------------

    def entries(self, dst: int) -> list[RouteMapEntry]:
        return self.route_map.get(dst, [])

    def primaries(self, dst: int | None = None) -> list[RouteMapEntry]:
        if dst is not None:
            return self.entries(dst)[: self.max_routes]
        out = []
        for d in sorted(self.route_map):
            out.extend(self.route_map[d][: self.max_routes])
        return out

    def primary(self, dst: int) -> RouteMapEntry | None:
        lst = self.entries(dst)
        return lst[0] if lst else None

    def sort_key(self, entry: RouteMapEntry):
        return (-efficiency(entry.rem, self.efficiency_measure),
                entry.rem.trtt, -entry.rem.bw, len(entry.hops), entry.hops)

    def resort(self, dst: int | None = None):
        dsts = [dst] if dst is not None else list(self.route_map)
        for d in dsts:
            self.route_map[d] = sorted(self.route_map[d], key=self.sort_key)

    def candidate_efficiency(self, dst: int, hops: Route, rem: Rem) -> float:
        """Candidate efficiency, optionally penalized for similarity (>0.5)
        with an already stored route to the same destination."""
        eff = efficiency(rem, self.efficiency_measure)
        if self.penalty_enabled:
            for stored in self.entries(dst):
                s = similarity(hops, stored.hops)
                if s > PENALTY_THRESHOLD:
                    eff = eff * (1.0 - s) / self.penalty_k
                    break
        return eff

    def evaluate(self, candidates) -> tuple[bool, list[tuple[str, RouteMapEntry]]]:
        """Interest decision plus update plan for a batch of candidate routes.

        A candidate (hops, rem) for destination dst is interesting when the
        destination has fewer than max_routes entries or when it strictly
        beats the worst primary.  Equal efficiency never displaces.  The plan
        is applied immediately to keep later candidates honest.
        """
        interesting = False
        plan: list[tuple[str, RouteMapEntry]] = []
        for hops, rem in candidates:
            dst = hops[-1]
            if dst == self.node or not rem.reachable:
                continue
            if len(hops) != len(set(hops)):
                continue  # cycle-bearing read, never storable
            entries = self.route_map.get(dst)
            if entries is None:
                entries = self.route_map[dst] = []
            same = next((e for e in entries if e.hops == hops), None)
            if same is not None:
                # same path, different value: a fresher measurement, take it;
                # only an improvement counts as news (a worsened reading is
                # the case the plain interest rule deliberately drops)
                if rem != same.rem:
                    improved = (self.sort_key(replace_entry(same, rem))
                                < self.sort_key(same))
                    same.rem = rem
                    self.resort(dst)
                    plan.append(("update", same))
                    if improved:
                        interesting = True
                continue
            entry = RouteMapEntry(dst, hops[1] if len(hops) > 1 else dst,
                                  rem, tpmask(hops), hops)
            if len(entries) < self.max_routes:
                entries.append(entry)
                self.resort(dst)
                interesting = True
                plan.append(("insert", entry))
                continue
            worst = entries[self.max_routes - 1]
            cand_eff = self.candidate_efficiency(dst, hops, rem)
            if cand_eff > efficiency(worst.rem, self.efficiency_measure):
                entries.append(entry)
                self.resort(dst)
                del entries[self.stored_limit:]
                interesting = True
                plan.append(("insert", entry))
        # keep every destination list within the storage budget
        for d in {e.dst for _, e in plan}:
            del self.route_map[d][self.stored_limit:]
        return interesting, plan

    def purge_dead(self, dead: int):
        """Drop every route that touches a dead node."""
        for d in list(self.route_map):
            self.route_map[d] = [e for e in self.route_map[d] if dead not in e.hops]
            if not self.route_map[d]:
                del self.route_map[d]
        self.route_map.pop(dead, None)

    def purge_unreachable(self):
        for d in list(self.route_map):
            self.route_map[d] = [e for e in self.route_map[d] if e.rem.reachable]
            if not self.route_map[d]:
                del self.route_map[d]


def replace_entry(entry: RouteMapEntry, rem: Rem) -> RouteMapEntry:
    return RouteMapEntry(entry.dst, entry.gateway, rem, entry.mask, entry.hops)


def is_interesting(state: NodeState, candidates) -> bool:
    """Pure query form of the interest rule (evaluates on a throwaway copy)."""
    probe = NodeState(state.node, state.max_routes, state.max_stored,
                      state.mode, state.efficiency_measure,
                      state.penalty_enabled, state.penalty_k)
    probe.route_map = {d: [replace_entry(e, e.rem) for e in lst]
                       for d, lst in state.route_map.items()}
    interesting, _ = probe.evaluate(candidates)
    return interesting


def absorb(state: NodeState, candidates) -> bool:
    """Insert whatever improves the map; returns the interest verdict."""
    interesting, _ = state.evaluate(candidates)
    return interesting


# -- route extraction --------------------------------------------------------

def _segment_routes_reverse(entries, receiver: int,
                            arrival: LinkQuality) -> list[tuple[Route, Rem]]:
    """Reverse reading: receiver learns a route to every prior hop.

    Stops at the first repeated node: every longer read revisits it, and
    routes with revisits are never storable anyway.
    """
    routes = []
    hops = [receiver]
    seen = {receiver}
    rem = Rem(arrival.rtt, arrival.bw)
    for i in range(len(entries) - 1, -1, -1):
        node = entries[i].node
        if node in seen:
            break
        seen.add(node)
        hops.append(node)
        routes.append((tuple(hops), rem))
        if i > 0:
            q = entries[i].quality
            if q is None:
                break
            rem = rem.extend(q)
    return routes


def _split_reflections(entries):
    """Split a body at immediate-reversal points X a c a Y -> X a c | c a Y."""
    segs = []
    start = 0
    nodes = [e.node for e in entries]
    for i in range(1, len(nodes) - 1):
        if nodes[i - 1] == nodes[i + 1]:
            segs.append(entries[start:i + 1])
            start = i
    segs.append(entries[start:])
    return segs


def extract_routes(body, receiver: int, arrival: LinkQuality,
                   mode: str = "sym") -> list[tuple[Route, Rem]]:
    """Routes a receiver learns from a delivered body.

    Symmetric mode reads the body backwards (reversed suffixes).  Asymmetric
    mode additionally splits the body at reflection points and reads the
    receiver's own earlier passages forward, recovering upload routes.
    """
    entries = list(body)
    if not entries:
        return []
    for prev, cur in zip(entries, entries[1:]):
        if cur.quality is None:
            raise ValueError("non-origin body entry lacks link quality")
    if mode == "sym":
        return _segment_routes_reverse(entries, receiver, arrival)
    segs = _split_reflections(entries)
    routes = _segment_routes_reverse(segs[-1], receiver, arrival)
    emitted = {h for h, _ in routes}
    for seg in segs[:-1]:
        nodes = [e.node for e in seg]
        for pos, n in enumerate(nodes):
            if n != receiver:
                continue
            # forward (upload) reading from our own earlier passage
            rem = REM_EMPTY
            hops = [receiver]
            walked = {receiver}
            for j in range(pos + 1, len(seg)):
                if seg[j].node in walked:
                    break
                rem = rem.extend(seg[j].quality)
                walked.add(seg[j].node)
                hops.append(seg[j].node)
                r = tuple(hops)
                if r not in emitted:
                    routes.append((r, rem))
                    emitted.add(r)
    return routes


# -- handlers -----------------------------------------------------------------

@dataclass
class HandlerResult:
    sends: list[tuple[int, Packet]] = field(default_factory=list)
    interesting: bool = True
    completed_route: Route | None = None
    accepted: bool = True  # False when the acyclic rule rejected the delivery


def handle_plain_tp(state: NodeState, packet: Packet, sender: int,
                    arrival: LinkQuality, neighbors) -> HandlerResult:
    """First packet of a flood is forwarded everywhere but back; later
    packets of the same flood still teach routes but die here."""
    routes = extract_routes(packet.body, state.node, arrival, state.mode)
    absorb(state, routes)
    if packet.flood_id in state.seen_floods:
        return HandlerResult(sends=[], interesting=False)
    state.seen_floods.add(packet.flood_id)
    out = packet.appended(state.node, arrival)
    sends = [(nb, out) for nb in neighbors if nb != sender]
    return HandlerResult(sends=sends)


def handle_atp(state: NodeState, packet: Packet, sender: int,
               arrival: LinkQuality, neighbors) -> HandlerResult:
    """Acyclic flood: die on the first revisited node, never reflect."""
    if state.node in packet.hops():
        return HandlerResult(sends=[], interesting=False, accepted=False)
    routes = extract_routes(packet.body, state.node, arrival, state.mode)
    absorb(state, routes)
    out = packet.appended(state.node, arrival)
    body_nodes = set(out.hops())
    completed = out.hops() if all(nb in body_nodes for nb in neighbors) else None
    sends = [(nb, out) for nb in neighbors if nb != sender]
    return HandlerResult(sends=sends, completed_route=completed)


def handle_ctp(state: NodeState, packet: Packet, sender: int,
               arrival: LinkQuality, neighbors,
               q2_enabled: bool, acyclic: bool = False) -> HandlerResult:
    """Continuous tracer forwarding.

    Degree-1 nodes always reflect: symmetric mode erases the body first (the
    segment already knows those routes), asymmetric mode keeps it so upload
    routes survive.  Otherwise the interest rule (when enabled) decides
    between forwarding everywhere-but-back and dropping.
    """
    routes = extract_routes(packet.body, state.node, arrival, state.mode)
    if len(neighbors) == 1:
        absorb(state, routes)
        base = replace(packet, body=()) if state.mode == "sym" else packet
        out = base.appended(state.node, arrival)
        return HandlerResult(sends=[(neighbors[0], out)])
    if acyclic and state.node in packet.hops():
        absorb(state, routes)
        return HandlerResult(sends=[], interesting=False, accepted=False)
    if q2_enabled:
        interesting = absorb(state, routes)
        if not interesting:
            return HandlerResult(sends=[], interesting=False)
    else:
        absorb(state, routes)
    out = packet.appended(state.node, arrival)
    sends = [(nb, out) for nb in neighbors if nb != sender]
    return HandlerResult(sends=sends)


def originate_flood(state: NodeState, kind: str) -> Packet:
    """Starter packet for a plain/atp/ctp flood from this node."""
    body = (BodyEntry(state.node, None),)
    if kind == PLAIN:
        fid = (state.node, state.flood_seq)
        state.flood_seq += 1
        state.seen_floods.add(fid)
        return Packet(PLAIN, body, flood_id=fid)
    return Packet(kind, body)
