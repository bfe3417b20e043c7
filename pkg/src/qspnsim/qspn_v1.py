"""Two-phase exploration: qclose floods close links, extreme nodes qopen back.

Link flags are kept per starter so simultaneous floods never share state.
Bodies are ordinary tracer bodies, so route absorption reuses the core
extraction.  A node whose links are all closed for some flood becomes that
flood's extreme node exactly once and converts the close wave into the open
wave: every close-wave body it heard is reflected back out, which is what
lets the two half-explorations learn about each other.

What keeps this cheaper than the continuous flood: a node pushes the close
wave down each link at most once, the open wave is relayed only while it
still teaches the relaying node something, and the starter — where every
wave terminates — re-emits a report only toward neighbours that are not on
the report's own path.  Two escape hatches preserve completeness: a body
naming a brand-new destination that arrives over an already-closed link is
relayed onward (late news must not die at the collision line), and degree-1
neighbours are exempt from the once-per-link limit since a leaf can hear
the world only through its hub.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .qspn_core import (
    QCLOSE, QOPEN, BodyEntry, HandlerResult, NodeState, Packet, absorb,
    extract_routes,
)
from .topo import Graph, LinkQuality


@dataclass
class V1State:
    """Per-node bookkeeping for qclose/qopen floods, keyed by starter."""

    closed: dict[int, set[int]] = field(default_factory=dict)
    sent: dict[int, set[int]] = field(default_factory=dict)
    last_qclose: dict[int, tuple[int, tuple[BodyEntry, ...], LinkQuality]] = field(
        default_factory=dict)
    extreme_done: set[int] = field(default_factory=set)


def _leaf(graph: Graph, nb: int) -> bool:
    return graph.degree(nb) == 1


def originate_qclose(state: NodeState) -> Packet:
    return Packet(QCLOSE, (BodyEntry(state.node, None),), starter=state.node)


def handle_qclose(state: NodeState, v1: V1State, packet: Packet, sender: int,
                  arrival: LinkQuality, neighbors,
                  graph: Graph) -> HandlerResult:
    """Close the arrival link, absorb, spread the wave once per link.

    Forwarding goes out over links neither closed nor already used for this
    flood, while the packet is interesting; leaf neighbours are fed past the
    once-per-link limit.  All links closed makes this node the flood's
    extreme.  A body with a brand-new destination arriving over an
    already-closed link is relayed to everyone but the sender instead of
    dying at the collision line.
    """
    starter = packet.starter
    known_before = {d for d, lst in state.route_map.items() if lst}
    interesting = absorb(
        state, extract_routes(packet.body, state.node, arrival, state.mode))
    new_dst = any(lst and d not in known_before
                  for d, lst in state.route_map.items())
    closed = v1.closed.setdefault(starter, set())
    sent = v1.sent.setdefault(starter, set())
    duplicate_link = sender in closed
    closed.add(sender)
    v1.last_qclose[starter] = (sender, packet.body, arrival)
    out = packet.appended(state.node, arrival)

    if duplicate_link:
        # late news over a closed link: only a brand-new destination is
        # worth rescuing past the collision line
        if not new_dst:
            return HandlerResult(sends=[], interesting=False)
        return HandlerResult(
            sends=[(nb, out) for nb in neighbors if nb != sender])

    if interesting:
        # leaf neighbours can only hear the far side through us, so they
        # bypass the per-link limit
        targets = [nb for nb in neighbors if nb not in closed
                   and (nb not in sent or _leaf(graph, nb))]
    else:
        targets = []
    sent.update(targets)
    sends = [(nb, out) for nb in targets]
    if (not sends and starter != state.node
            and starter not in v1.extreme_done
            and all(nb in closed for nb in neighbors)):
        v1.extreme_done.add(starter)
        return HandlerResult(sends=emit_qopen(state, v1, starter, neighbors))
    return HandlerResult(sends=sends, interesting=interesting)


def emit_qopen(state: NodeState, v1: V1State, starter: int,
               neighbors) -> list[tuple[int, Packet]]:
    """The collision converts the close wave into the open wave.

    An empty qopen goes back toward the last qclose's sender (a bare
    receipt); the last qclose's body, with our hop appended, goes to every
    other neighbour so the other half of the exploration hears this one.
    """
    last_sender, last_body, last_arrival = v1.last_qclose[starter]
    empty = Packet(QOPEN, (BodyEntry(state.node, None),), starter=starter)
    full = Packet(QOPEN, last_body + (BodyEntry(state.node, last_arrival),),
                  starter=starter)
    return [(last_sender, empty)] + [
        (nb, full) for nb in neighbors if nb != last_sender
    ]


def handle_qopen(state: NodeState, v1: V1State, packet: Packet, sender: int,
                 arrival: LinkQuality, neighbors,
                 graph: Graph) -> HandlerResult:
    """Relay an open-wave report while it teaches something.

    Ordinary nodes forward interesting reports to everyone but the sender
    and let boring ones expire.  The starter, every wave's terminus, instead
    relays each arriving report to the neighbours that are not on the
    report's own path: those provably have not carried it, and on densely
    meshed graphs the path covers the whole neighbourhood, so this backflow
    vanishes exactly where it would be wasted.
    """
    interesting = absorb(
        state, extract_routes(packet.body, state.node, arrival, state.mode))
    if state.node == packet.starter:
        on_path = set(packet.hops())
        targets = [nb for nb in neighbors
                   if nb != sender and nb not in on_path]
    elif interesting:
        targets = [nb for nb in neighbors if nb != sender]
    else:
        return HandlerResult(sends=[], interesting=False)
    if not targets:
        return HandlerResult(sends=[], interesting=interesting)
    out = packet.appended(state.node, arrival)
    return HandlerResult(sends=[(nb, out) for nb in targets])
