"""Map repair after topology changes: extended tracer packets.

An extended packet is an acyclic tracer carrying a map excerpt (route
records), the change that triggered it, and a flag of interest.  Endpoints of
a changed link build the initial packets; receivers patch their own maps from
the announced change, splice the carried records behind the packet's covered
hops, keep what improves them, and forward while anything was worth keeping.
A node that finds a flag-raised packet useless instead replies with its own
routes for the affected destinations, so repair information flows back into
the damaged region.
"""

from __future__ import annotations

from dataclasses import replace

from .qspn_core import (
    DEATH, ETP_KIND, BodyEntry, ChangeInfo, HandlerResult, NodeState, Packet,
    RouteRecord, absorb, extract_routes,
)
from .routecalc import REM_EMPTY, REM_UNREACHABLE, Rem, efficiency, route_rem, tpmask
from .topo import Graph, LinkQuality


def _crosses_edge(hops, u: int, v: int) -> bool:
    return any((a == u and b == v) or (a == v and b == u)
               for a, b in zip(hops, hops[1:]))


def apply_change_to_map(state: NodeState, change: ChangeInfo,
                        graph: Graph) -> bool:
    """Patch this node's own stored routes for an announced change.

    Routes over a worsened/improved link are recomputed against the current
    graph; routes over a broken link or through a dead node become
    unreachable (purged after the storm quiesces).  Returns True when any
    entry was touched — that alone makes the packet worth forwarding, since
    downstream nodes on the same routes are affected too.
    """
    affected = False
    if change.kind in ("worsen", "improve", "new"):
        for dst in list(state.route_map):
            touched = False
            for e in state.route_map[dst]:
                if e.rem.reachable and _crosses_edge(e.hops, change.u, change.v):
                    new_rem = route_rem(e.hops, graph)
                    if new_rem != e.rem:
                        e.rem = new_rem
                        touched = True
            if touched:
                state.resort(dst)
                affected = True
    elif change.kind == "break":
        for dst in list(state.route_map):
            touched = False
            for e in state.route_map[dst]:
                if e.rem.reachable and _crosses_edge(e.hops, change.u, change.v):
                    e.rem = REM_UNREACHABLE
                    touched = True
            if touched:
                state.resort(dst)
                affected = True
    elif change.kind == "death":
        dead = change.u
        if dead not in state.known_dead:
            state.known_dead.add(dead)
        for dst in list(state.route_map):
            touched = False
            for e in state.route_map[dst]:
                if e.rem.reachable and dead in e.hops:
                    e.rem = REM_UNREACHABLE
                    touched = True
            if touched:
                state.resort(dst)
                affected = True
    # "join" announces a new node; there is nothing of ours to patch
    return affected


def _records_from_entries(entries) -> tuple[RouteRecord, ...]:
    return tuple(RouteRecord(e.dst, e.rem, tpmask(e.hops), e.hops)
                 for e in entries)


def _worsen_formula(entry_rem: Rem, old: LinkQuality, new: LinkQuality) -> Rem:
    """Endpoint map-update formulas: t1(r) = t0(r) - t0(l) + t1(l),
    b1(r) = min(b0(r), b1(l))."""
    return Rem(entry_rem.trtt - old.rtt + new.rtt, min(entry_rem.bw, new.bw))


def on_link_worsened(state: NodeState, other: int, old: LinkQuality,
                     new: LinkQuality | None, graph: Graph,
                     change_kind: str) -> list[tuple[int, Packet]]:
    """Endpoint reaction to a worsened (or broken, new=None) link to `other`.

    Returns the copies to inject: one extended packet to every neighbour
    except the other endpoint, or nothing when no primary beyond the direct
    route used the link.
    """
    # every primary routed over the link is affected, the one-hop direct
    # route included: remote nodes may extend exactly that route, so its
    # degradation must flood too
    affected_q = [e for e in state.primaries() if e.gateway == other]
    for dst in list(state.route_map):
        touched = False
        for e in state.route_map[dst]:
            if e.gateway == other and e.rem.reachable:
                e.rem = (_worsen_formula(e.rem, old, new)
                         if new is not None else REM_UNREACHABLE)
                touched = True
        if touched:
            state.resort(dst)
    if not affected_q:
        return []
    dsts = sorted({e.dst for e in affected_q})
    rset = [e for d in dsts for e in state.primaries(d)]
    assert {e.dst for e in affected_q} <= {e.dst for e in rset}  # Q <= R by dst
    change = ChangeInfo(change_kind, state.node, other, new)
    if new is not None:
        traversed = (BodyEntry(other, None), BodyEntry(state.node, new))
    else:
        traversed = (BodyEntry(state.node, None),)
    pkt = Packet(ETP_KIND, traversed, records=_records_from_entries(rset),
                 change=change, flag_of_interest=True)
    return [(nb, pkt) for nb in graph.neighbors(state.node) if nb != other]


def on_link_improved(state: NodeState, other: int, new: LinkQuality,
                     graph: Graph, change_kind: str) -> list[tuple[int, Packet]]:
    """Endpoint reaction to an improved (or brand new) link to `other`:
    offer every primary not already routed via the other endpoint."""
    for dst in list(state.route_map):
        touched = False
        for e in state.route_map[dst]:
            if e.gateway == other and e.rem.reachable:
                e.rem = route_rem(e.hops, graph)
                touched = True
        if touched:
            state.resort(dst)
    rset = [e for e in state.primaries()
            if e.gateway != other and e.dst != other and e.rem.reachable]
    change = ChangeInfo(change_kind, state.node, other, new)
    # a trivial self-record keeps "route to this endpoint" alive through
    # nodes the splice merely ties with
    self_rec = RouteRecord(state.node, REM_EMPTY, tpmask((state.node,)),
                           (state.node,))
    pkt = Packet(ETP_KIND, (BodyEntry(state.node, None),),
                 records=(self_rec,) + _records_from_entries(rset),
                 change=change, flag_of_interest=True)
    # sent even when the record set is otherwise empty: the link value is news
    return [(other, pkt)]


def on_node_death(state: NodeState, dead: int,
                  graph: Graph) -> list[tuple[int, Packet]]:
    """Neighbour reaction to a dead node: unreachable-mark every route
    through it and flood the repair packet plus death notice."""
    state.known_dead.add(dead)
    affected_q = [e for e in state.primaries() if dead in e.hops]
    for dst in list(state.route_map):
        touched = False
        for e in state.route_map[dst]:
            if dead in e.hops and e.rem.reachable:
                e.rem = REM_UNREACHABLE
                touched = True
        if touched:
            state.resort(dst)
    if not affected_q:
        return []
    dsts = sorted({e.dst for e in affected_q})
    rset = [e for d in dsts for e in state.primaries(d)]
    change = ChangeInfo("death", dead)
    pkt = Packet(ETP_KIND, (BodyEntry(state.node, None),),
                 records=_records_from_entries(rset),
                 change=change, flag_of_interest=True)
    return [(nb, pkt) for nb in graph.neighbors(state.node)]


def on_node_join(state: NodeState, neighbor_states: dict[int, NodeState],
                 graph: Graph) -> list[tuple[int, Packet]]:
    """Hooking: copy every neighbour's map, keep the best per destination,
    then (with more than one neighbour) offer our merged primaries around."""
    if not neighbor_states:
        raise ValueError(f"node {state.node} joined with no live neighbours")
    candidates = []
    for nb, nb_state in neighbor_states.items():
        q = graph.quality(state.node, nb)
        candidates.append(((state.node, nb), Rem(q.rtt, q.bw)))
        for dst in nb_state.route_map:
            for e in nb_state.route_map[dst]:
                if state.node in e.hops or not e.rem.reachable:
                    continue
                candidates.append(((state.node,) + e.hops, e.rem.extend(q)))
    absorb(state, candidates)
    if len(neighbor_states) < 2:
        return []
    change = ChangeInfo("join", state.node)
    self_rec = RouteRecord(state.node, REM_EMPTY, tpmask((state.node,)),
                           (state.node,))
    pkt = Packet(ETP_KIND, (BodyEntry(state.node, None),),
                 records=(self_rec,) + _records_from_entries(state.primaries()),
                 change=change, flag_of_interest=True)
    return [(nb, pkt) for nb in sorted(neighbor_states)]


# -- receive side ------------------------------------------------------------

def _record_candidates(packet: Packet, receiver: int, arrival: LinkQuality):
    """Splice each carried record behind the packet's covered hops.

    The spliced route is receiver -> (traversed hops back to the record's
    owner) -> the record's own hops; its value accumulates the traversed
    link qualities on top of the record's rem.
    """
    hops_fwd = packet.hops()
    out = []
    for rec in packet.records:
        if not rec.rem.reachable:
            continue  # repair markers carry no route to splice
        owner = rec.hops[0]
        try:
            oi = len(hops_fwd) - 1 - hops_fwd[::-1].index(owner)
        except ValueError:
            continue  # malformed: owner not on the covered path
        prefix = [receiver]
        rem = Rem(arrival.rtt, arrival.bw)
        ok = True
        for j in range(len(hops_fwd) - 1, oi, -1):
            prefix.append(hops_fwd[j])
            q = packet.body[j].quality
            if q is None:
                ok = False
                break
            rem = rem.extend(q)
        if not ok:
            continue
        hops = tuple(prefix) + rec.hops
        if len(hops) != len(set(hops)):
            continue  # would revisit a node: not a storable route
        out.append((hops, rec.rem if not rec.rem.reachable
                    else Rem(rem.trtt + rec.rem.trtt, min(rem.bw, rec.rem.bw)),
                    rec))
    return out


def on_etp_receive(state: NodeState, packet: Packet, sender: int,
                   arrival: LinkQuality, neighbors,
                   graph: Graph) -> HandlerResult:
    """Process one extended packet delivery.

    Order: acyclic check; patch own map from the announced change; absorb the
    covered hops as an ordinary tracer; match records against primaries by
    (destination, exact hop mask) for in-place value patches, otherwise let
    the spliced candidate compete under the interest rule.  Forward while
    anything mattered; a useless flag-raised packet earns the sender a reply
    built from our own routes for the same destinations (plus, for a death,
    the one-shot death notice to everyone else).
    """
    if state.node in packet.hops():
        return HandlerResult(sends=[], interesting=False, accepted=False)
    affected = (apply_change_to_map(state, packet.change, graph)
                if packet.change is not None else False)
    tp_interest = absorb(
        state, extract_routes(packet.body, state.node, arrival, state.mode))

    # unreachable records ride along untouched: they are repair-request
    # markers keying the replies, never routes to splice (the announced
    # change already patched whatever of ours crossed the damage)
    kept: list[RouteRecord] = [r for r in packet.records
                               if not r.rem.reachable]
    record_interest = False
    for hops, rem, rec in _record_candidates(packet, state.node, arrival):
        dst = hops[-1]
        if dst == state.node:
            continue
        mask = tpmask(hops)
        matched = None
        for e in state.primaries(dst):
            if e.mask == mask:
                matched = e
                break
        if matched is not None:
            if matched.rem != rem:
                matched.rem = rem
                state.resort(dst)
            kept.append(rec)
            record_interest = True
            continue
        if absorb(state, [(hops, rem)]):
            kept.append(rec)
            record_interest = True
            continue
        # a candidate no worse than our current primary stays in the packet:
        # it taught us nothing, but a tie here may be a strict improvement
        # one hop further on, and repair floods are bounded by acyclicity
        primaries = state.primaries(dst)
        if primaries:
            cand = efficiency(rem, state.efficiency_measure)
            worst = efficiency(primaries[-1].rem, state.efficiency_measure)
            if cand >= worst:
                kept.append(rec)
                record_interest = True
    interesting = record_interest or affected or tp_interest

    if not interesting:
        if not packet.flag_of_interest:
            return HandlerResult(sends=[], interesting=False)
        return HandlerResult(sends=on_uninteresting(state, packet, sender,
                                                    neighbors),
                             interesting=False)
    # widen the repair request with destinations our own purge just lost
    marked = {r.dst for r in kept if not r.rem.reachable}
    if affected and packet.change is not None \
            and packet.change.kind in ("break", "death"):
        for d in sorted(state.route_map):
            entries = state.route_map[d]
            if entries and not entries[0].rem.reachable and d not in marked:
                kept.append(RouteRecord(d, REM_UNREACHABLE, tpmask((d,)), (d,)))
                marked.add(d)
    out = replace(packet, records=tuple(kept))
    out = out.appended(state.node, arrival)
    sends = [(nb, out) for nb in neighbors if nb != sender]
    return HandlerResult(sends=sends)


def on_uninteresting(state: NodeState, packet: Packet, sender: int,
                     neighbors) -> list[tuple[int, Packet]]:
    """Reply to a useless flag-raised packet with our own routes for its
    destinations; a death additionally spawns the one-shot death notice."""
    sends: list[tuple[int, Packet]] = []
    dsts = sorted({r.dst for r in packet.records})
    srecords = _records_from_entries(
        e for d in dsts for e in state.primaries(d) if e.rem.reachable)
    if srecords:
        reply = Packet(ETP_KIND, (BodyEntry(state.node, None),),
                       records=srecords, flag_of_interest=False)
        sends.append((sender, reply))
    if packet.change is not None and packet.change.kind == "death":
        notice = Packet(DEATH, (BodyEntry(state.node, None),),
                        change=packet.change)
        sends.extend((nb, notice) for nb in neighbors if nb != sender)
    return sends


def handle_death_tp(state: NodeState, packet: Packet, sender: int,
                    arrival: LinkQuality, neighbors) -> HandlerResult:
    """Simple death notice under interest rules: useful exactly once."""
    dead = packet.change.u
    absorb(state, extract_routes(packet.body, state.node, arrival, state.mode))
    if dead in state.known_dead:
        return HandlerResult(sends=[], interesting=False)
    apply_change_to_map(state, packet.change, None)
    out = packet.appended(state.node, arrival)
    return HandlerResult(sends=[(nb, out) for nb in neighbors if nb != sender])
