"""Offline route combinatorics: enumeration, simplification, route metrics.

Routes are tuples of node ids whose first element is the origin.  This module
is the pure, simulation-free side of the library: it enumerates the maximal
branches a depth-first exploration produces, rewrites route sets into compact
tracer bodies, and provides the reference metrics (total rtt, bottleneck
bandwidth, similarity, efficiency classes) the protocols are judged against.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .topo import Graph, LinkQuality

Route = tuple[int, ...]


@dataclass(frozen=True)
class Rem:
    """Route efficiency measure: additive total rtt, bottleneck bandwidth."""

    trtt: float
    bw: float

    def extend(self, q: LinkQuality) -> "Rem":
        return Rem(self.trtt + q.rtt, min(self.bw, q.bw))

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.trtt)


REM_EMPTY = Rem(0.0, math.inf)
REM_UNREACHABLE = Rem(math.inf, 0.0)


def tpmask(route: Route, width: int = 256) -> int:
    """Bitset of the route's hops.

    The nominal width is max(256, highest id + 1); Python ints widen past the
    256-bit floor transparently, so `width` is documentation more than limit.
    """
    mask = 0
    for hop in route:
        mask |= 1 << hop
    return mask


def efficiency(rem: Rem, measure: str = "rtt") -> float:
    """Scalar route efficiency, higher is better.

    "rtt": 1/trtt (an unknown destination scores 0, so anything beats it),
    "bw": bottleneck bandwidth, "composite": bw/trtt.
    """
    if not rem.reachable:
        return 0.0
    if measure == "rtt":
        return math.inf if rem.trtt == 0 else 1.0 / rem.trtt
    if measure == "bw":
        return rem.bw
    if measure == "composite":
        return math.inf if rem.trtt == 0 else rem.bw / rem.trtt
    raise ValueError(f"unknown efficiency measure {measure!r}")


# -- enumeration -----------------------------------------------------------

def maximal_branches(graph: Graph, start: int) -> set[Route]:
    """All maximal simple branches from `start`.

    Recursive exploration: extend through any neighbour not already in the
    branch; when no unvisited neighbour exists the branch is maximal and is
    emitted.  Cycles are thereby traversed at most once per branch.
    """
    routes: set[Route] = set()
    branch = [start]
    in_branch = {start}

    def walk(node: int):
        deepened = False
        for nb in graph.neighbors(node):
            if nb in in_branch:
                continue
            in_branch.add(nb)
            branch.append(nb)
            walk(nb)
            branch.pop()
            in_branch.discard(nb)
            deepened = True
        if not deepened:
            routes.add(tuple(branch))

    walk(start)
    return routes


def enumerate_routes(graph: Graph) -> set[Route]:
    """The graph's non-redundant maximal branch set.

    Union of maximal branches over all starters, minus branches that start at
    a degree-1 node and end at an interior node: such a branch is the exact
    reverse of a branch already emitted from its far end, so it adds no
    information.  Leaf-to-leaf branches (segments) are kept, since both
    orientations are needed there.
    """
    out: set[Route] = set()
    for n in graph.nodes():
        for r in maximal_branches(graph, n):
            if len(r) > 1 and graph.degree(r[0]) == 1 and graph.degree(r[-1]) > 1:
                continue
            out.add(r)
    return out


# -- simplification ---------------------------------------------------------

def _valid_verse(route: Route) -> bool:
    """Reject the immediate-reversal pattern X a c a Y."""
    return all(route[i] != route[i + 2] for i in range(len(route) - 2))


def _try_absorb(a: Route, b: Route) -> Route | None:
    """b is a contiguous subroute of a: a alone carries it."""
    la, lb = len(a), len(b)
    if lb > la:
        return None
    for i in range(la - lb + 1):
        if a[i:i + lb] == b:
            return a
    return None


def _try_overlap(a: Route, b: Route) -> Route | None:
    """Suffix of a equals prefix of b: splice into one route (longest first)."""
    for k in range(min(len(a), len(b)) - 1, 0, -1):
        if a[-k:] == b[:k]:
            merged = a + b[k:]
            if _valid_verse(merged):
                return merged
    return None


def _try_cycle_tail(a: Route, b: Route) -> Route | None:
    """a ends with a cycle c..c after prefix X, b = X c Y: append Y to a."""
    c = a[-1]
    for j in range(len(a) - 1):
        if a[j] != c:
            continue
        x_len = j
        if len(b) <= x_len + 1:
            continue
        if b[:x_len] == a[:x_len] and b[x_len] == c:
            merged = a + b[x_len + 1:]
            if len(merged) > len(a) and _valid_verse(merged):
                return merged
    return None


def _try_cycle_head(a: Route, b: Route) -> Route | None:
    """a = (c..c) Z, b = Y c Z: prepend Y to a."""
    c = a[0]
    for j in range(1, len(a)):
        if a[j] != c:
            continue
        z = a[j + 1:]
        if len(b) < len(z) + 2:
            continue
        if b[len(b) - len(z):] == z and b[len(b) - len(z) - 1] == c:
            y = b[:len(b) - len(z) - 1]
            merged = y + a
            if len(merged) > len(a) and _valid_verse(merged):
                return merged
    return None


def _try_cycle_splice(a: Route, b: Route) -> Route | None:
    """a is a pure cycle c..c, b = Y c Z: replace that c by the whole cycle."""
    if len(a) < 3 or a[0] != a[-1] or len(b) < 2:
        return None
    c = a[0]
    for i, node in enumerate(b):
        if node != c:
            continue
        merged = b[:i] + a + b[i + 1:]
        if len(merged) > max(len(a), len(b)) and _valid_verse(merged):
            return merged
    return None


# Deterministic rule cascade per ordered pair: contiguous absorption first,
# then the overlap splice, then the three cycle splices.  Absorption must
# precede the overlap rule or contained routes get spliced into ever-longer
# bodies instead of disappearing.
_RULES = (
    ("absorb", _try_absorb),
    ("overlap", _try_overlap),
    ("cycle_tail", _try_cycle_tail),
    ("cycle_head", _try_cycle_head),
    ("cycle_splice", _try_cycle_splice),
)


def _find_rewrite(current: list[Route]):
    for a in current:
        for b in current:
            if a == b:
                continue
            for _name, rule in _RULES:
                merged = rule(a, b)
                if merged is not None:
                    return a, b, merged
    return None


def simplify(routes) -> set[Route]:
    """Rewrite a route set to a fixed point of the merge rules.

    Each rewrite replaces an ordered pair of routes with a single covering
    body, so the set shrinks by one per step and termination is immediate.
    Scanning order (sorted pairs, fixed rule cascade, longest overlap first)
    makes the output reproducible.  Any rewrite that would create the
    forbidden immediate-reversal pattern is discarded.
    """
    current = sorted(set(tuple(r) for r in routes))
    while True:
        hit = _find_rewrite(current)
        if hit is None:
            return set(current)
        a, b, merged = hit
        nxt = [r for r in current if r != a and r != b]
        if merged not in nxt:
            nxt.append(merged)
        current = sorted(nxt)


def contains_route(tp_body: Route, r: Route) -> bool:
    """Is `r` readable from `tp_body` as a contiguous or implied subroute?

    Contiguous substrings count directly; additionally a detour that leaves a
    node and cycles back to it may be skipped, so a body X(c..c)Y still
    carries the route XcY.  Reverse reading is deliberately not granted.
    """
    n, m = len(tp_body), len(r)
    if m == 0:
        return False
    seen: dict[tuple[int, int], bool] = {}

    def match(i: int, j: int) -> bool:
        # invariant: tp_body[i] == r[j]
        if j == m - 1:
            return True
        key = (i, j)
        if key in seen:
            return seen[key]
        ok = False
        # direct step, or skip any cycle returning to this node first
        starts = [i] + [k for k in range(i + 1, n) if tp_body[k] == tp_body[i]]
        for k in starts:
            if k + 1 < n and tp_body[k + 1] == r[j + 1] and match(k + 1, j + 1):
                ok = True
                break
        seen[key] = ok
        return ok

    return any(match(i, 0) for i in range(n) if tp_body[i] == r[0])


def coverage(tp_bodies, routes) -> list[Route]:
    """Routes from `routes` not carried by any body (empty list = full cover)."""
    bodies = list(tp_bodies)
    return [r for r in routes if not any(contains_route(tp, r) for tp in bodies)]


# -- route metrics ----------------------------------------------------------

def route_rem(route: Route, graph: Graph) -> Rem:
    """Total rtt and bottleneck bandwidth of a hop sequence on `graph`."""
    rem = REM_EMPTY
    for u, v in zip(route, route[1:]):
        rem = rem.extend(graph.quality(u, v))
    return rem


def similarity(r: Route, s: Route) -> float:
    """Shared-intermediate-hop ratio in [0, 1].

    Counts intermediate hops (endpoints excluded) as unordered sets:
    |shared| / max(|int(r)|, |int(s)|).  Routes with no intermediates are
    similar only when identical; degenerate one-node routes score 0.
    """
    if len(r) <= 1 or len(s) <= 1:
        return 0.0
    ir, is_ = set(r[1:-1]), set(s[1:-1])
    if not ir and not is_:
        return 1.0 if r == s else 0.0
    if not ir or not is_:
        return 0.0
    return len(ir & is_) / max(len(ir), len(is_))


def apply_disjoint_penalty(rem_value: float, s: float, k: float) -> float:
    """Scale an efficiency value down by route similarity: Re * (1 - s) / k."""
    if k <= 0:
        raise ValueError("penalty coefficient k must be positive")
    if not 0.0 <= s <= 1.0:
        raise ValueError("similarity must lie in [0, 1]")
    return rem_value * (1.0 - s) / k


PENALTY_THRESHOLD = 0.5  # penalty applies only when similarity exceeds this


def classify_routes(n_routes: int, c: int) -> list[int]:
    """Efficiency class per sorted position: position p gets class ceil(p/c)."""
    if c < 1:
        raise ValueError("class size must be at least 1")
    return [(p + c - 1) // c for p in range(1, n_routes + 1)]


def subcycle_count(n: int) -> int:
    """Distinct cycles (length >= 3) in the complete graph on n nodes.

    Closed form: sum over k of C(n, k) * (k-1)! / 2 for k = 3..n.
    """
    if n < 3:
        return 0
    return sum(math.comb(n, k) * math.factorial(k - 1) // 2
               for k in range(3, n + 1))


def shortest_route_oracle(graph: Graph, src: int, dst: int) -> Rem | None:
    """Minimum-trtt route value via Dijkstra; None when unreachable.

    Bandwidth reported is the bottleneck along the found minimum-rtt route.
    """
    if src == dst:
        return REM_EMPTY
    best: dict[int, float] = {src: 0.0}
    bw_at: dict[int, float] = {src: math.inf}
    heap = [(0.0, src)]
    done: set[int] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return Rem(d, bw_at[u])
        for v in graph.neighbors(u):
            q = graph.quality(u, v)
            nd = d + q.rtt
            if v not in best or nd < best[v]:
                best[v] = nd
                bw_at[v] = min(bw_at[u], q.bw)
                heapq.heappush(heap, (nd, v))
    return None


def format_route(route: Route) -> str:
    return "->".join(str(n) for n in route)


def parse_route(text: str) -> Route:
    return tuple(int(p) for p in text.strip().split("->"))
