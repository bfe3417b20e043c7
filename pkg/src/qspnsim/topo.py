"""Network graph model: link qualities, deterministic generators, mutations.

Graphs are immutable snapshots: every mutation returns a new Graph plus a
ChangeRecord carrying the old/new link quality, so protocol code can feed
the map-update formulas and tests can apply the inverse mutation.

Node ids are dense non-negative integers.  Links are undirected with a single
quality per pair (rtt in milliseconds, bandwidth in capacity units); there is
no per-direction asymmetry at the topology layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class GraphError(ValueError):
    """Invalid graph construction or mutation request."""


class GraphParseError(GraphError):
    """Malformed graph text; carries the offending line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class LinkQuality:
    rtt: float = 1.0
    bw: float = 1.0

    def __post_init__(self):
        if not (self.rtt > 0 and math.isfinite(self.rtt)):
            raise GraphError(f"rtt must be positive and finite, got {self.rtt}")
        if not (self.bw > 0 and math.isfinite(self.bw)):
            raise GraphError(f"bw must be positive and finite, got {self.bw}")


@dataclass(frozen=True)
class ChangeRecord:
    """What a mutation did: enough to drive repair protocols and to undo it.

    For link changes `old`/`new` are the qualities before/after (None for a
    link that did not exist / no longer exists).  Broken links are modelled
    as removal; `new is None` stands in for the "infinitely worsened"
    sentinel, no infinities are stored in LinkQuality.  For node changes
    `links` lists the affected (neighbour, quality) pairs.
    """

    kind: str
    u: int
    v: int | None = None
    old: LinkQuality | None = None
    new: LinkQuality | None = None
    links: tuple[tuple[int, LinkQuality], ...] = ()


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Graph:
    """Undirected graph with per-link quality and per-node liveness.

    Treat instances as immutable: share them freely between simulation runs
    and use `mutate` (or the generators) to obtain modified copies.
    """

    __slots__ = ("node_count", "links", "alive", "_adj")

    def __init__(self, node_count: int,
                 links: dict[tuple[int, int], LinkQuality] | None = None,
                 alive: tuple[bool, ...] | None = None):
        if node_count < 0:
            raise GraphError("node_count must be non-negative")
        self.node_count = node_count
        self.links: dict[tuple[int, int], LinkQuality] = {}
        self.alive = alive if alive is not None else tuple([True] * node_count)
        if len(self.alive) != node_count:
            raise GraphError("alive vector length mismatch")
        self._adj: dict[int, list[int]] = {n: [] for n in range(node_count)}
        for (u, v), q in (links or {}).items():
            self._add_link(u, v, q)

    def _add_link(self, u: int, v: int, q: LinkQuality):
        if u == v:
            raise GraphError(f"self-loop on node {u}")
        for n in (u, v):
            if not (0 <= n < self.node_count):
                raise GraphError(f"node {n} out of range")
            if not self.alive[n]:
                raise GraphError(f"link endpoint {n} is dead")
        k = _key(u, v)
        if k in self.links:
            raise GraphError(f"duplicate link {k}")
        self.links[k] = q
        self._adj[u].append(v)
        self._adj[v].append(u)

    # -- queries ---------------------------------------------------------

    def nodes(self) -> list[int]:
        return [n for n in range(self.node_count) if self.alive[n]]

    def neighbors(self, n: int) -> list[int]:
        return sorted(self._adj[n])

    def degree(self, n: int) -> int:
        return len(self._adj[n])

    def has_link(self, u: int, v: int) -> bool:
        return _key(u, v) in self.links

    def quality(self, u: int, v: int) -> LinkQuality:
        try:
            return self.links[_key(u, v)]
        except KeyError:
            raise GraphError(f"no link {u}-{v}") from None

    def is_connected(self) -> bool:
        live = self.nodes()
        if len(live) <= 1:
            return True
        seen = {live[0]}
        stack = [live[0]]
        while stack:
            for m in self._adj[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == len(live)

    def copy_with(self, links: dict[tuple[int, int], LinkQuality],
                  node_count: int | None = None,
                  alive: tuple[bool, ...] | None = None) -> "Graph":
        return Graph(self.node_count if node_count is None else node_count,
                     links,
                     self.alive if alive is None else alive)

    def __eq__(self, other):
        return (isinstance(other, Graph)
                and self.node_count == other.node_count
                and self.alive == other.alive
                and self.links == other.links)

    def __hash__(self):
        return hash((self.node_count, self.alive, frozenset(self.links.items())))

    def __repr__(self):
        return f"Graph(n={self.node_count}, links={len(self.links)})"


# -- generators -----------------------------------------------------------

def gen_complete(k: int, quality: LinkQuality = LinkQuality()) -> Graph:
    """Complete graph on k nodes with uniform link quality."""
    if k < 1:
        raise GraphError("complete graph needs at least one node")
    links = {(i, j): quality for i in range(k) for j in range(i + 1, k)}
    return Graph(k, links)


def gen_mesh(rows: int, cols: int, quality: LinkQuality = LinkQuality()) -> Graph:
    """Square-grid mesh; node id is row * cols + col."""
    if rows < 1 or cols < 1:
        raise GraphError("mesh dimensions must be positive")
    links = {}
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                links[_key(n, n + 1)] = quality
            if r + 1 < rows:
                links[_key(n, n + cols)] = quality
    return Graph(rows * cols, links)


_M64 = (1 << 64) - 1


def splitmix64(seed: int):
    """Documented 64-bit PRNG (splitmix64) so graphs reproduce cross-language.

    Yields uniform integers in [0, 2**64).  Reference: Steele, Lea & Flood's
    SplittableRandom finalizer; constants 0x9E3779B97F4A7C15,
    0xBF58476D1CE4E5B9, 0x94D049BB133111EB.
    """
    state = seed & _M64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        yield z ^ (z >> 31)


def gen_random(n: int, p: float, seed: int,
               quality: LinkQuality = LinkQuality()) -> Graph:
    """Erdos-Renyi G(n, p) from splitmix64(seed).

    Pairs are drawn in ascending (i, j) order, one 53-bit uniform per pair,
    so identical (n, p, seed) always yields the identical link set.
    """
    if n < 1:
        raise GraphError("random graph needs at least one node")
    if not 0.0 <= p <= 1.0:
        raise GraphError("p must be a probability")
    rng = splitmix64(seed)
    links = {}
    for i in range(n):
        for j in range(i + 1, n):
            u = (next(rng) >> 11) / float(1 << 53)
            if u < p:
                links[(i, j)] = quality
    return Graph(n, links)


def gen_random_connected(n: int, p: float, seed: int,
                         quality: LinkQuality = LinkQuality(),
                         max_tries: int = 1000) -> Graph:
    """First connected G(n, p) along the deterministic seed sequence."""
    for t in range(max_tries):
        g = gen_random(n, p, seed + t, quality)
        if g.is_connected():
            return g
    raise GraphError(f"no connected graph within {max_tries} seeds")


# -- mutations ------------------------------------------------------------

def mutate(graph: Graph, kind: str, **args) -> tuple[Graph, ChangeRecord]:
    """Apply one of the six dynamics-triggering changes.

    Kinds: worsen_link(u, v, rtt=, bw=), improve_link(u, v, rtt=, bw=),
    break_link(u, v), new_link(u, v, rtt=, bw=), kill_node(node),
    add_node(links=[(neighbour, rtt, bw), ...]).
    """
    handler = _MUTATIONS.get(kind)
    if handler is None:
        raise GraphError(f"unknown mutation kind {kind!r}")
    return handler(graph, **args)


def _new_quality(old: LinkQuality, rtt, bw) -> LinkQuality:
    return LinkQuality(old.rtt if rtt is None else rtt,
                       old.bw if bw is None else bw)


def _worsen_link(graph, u, v, rtt=None, bw=None):
    old = graph.quality(u, v)
    new = _new_quality(old, rtt, bw)
    if not (new.rtt >= old.rtt and new.bw <= old.bw) or new == old:
        raise GraphError(f"worsen_link must degrade quality: {old} -> {new}")
    links = dict(graph.links)
    links[_key(u, v)] = new
    return graph.copy_with(links), ChangeRecord("worsen_link", u, v, old, new)


def _improve_link(graph, u, v, rtt=None, bw=None):
    old = graph.quality(u, v)
    new = _new_quality(old, rtt, bw)
    if not (new.rtt <= old.rtt and new.bw >= old.bw) or new == old:
        raise GraphError(f"improve_link must improve quality: {old} -> {new}")
    links = dict(graph.links)
    links[_key(u, v)] = new
    return graph.copy_with(links), ChangeRecord("improve_link", u, v, old, new)


def _break_link(graph, u, v):
    old = graph.quality(u, v)
    links = dict(graph.links)
    del links[_key(u, v)]
    return graph.copy_with(links), ChangeRecord("break_link", u, v, old, None)


def _new_link(graph, u, v, rtt=1.0, bw=1.0):
    if graph.has_link(u, v):
        raise GraphError(f"link {u}-{v} already exists")
    q = LinkQuality(rtt, bw)
    links = dict(graph.links)
    new_graph = graph.copy_with(links)
    new_graph._add_link(u, v, q)
    return new_graph, ChangeRecord("new_link", u, v, None, q)


def _kill_node(graph, node):
    if not (0 <= node < graph.node_count) or not graph.alive[node]:
        raise GraphError(f"node {node} does not exist or is already dead")
    removed = tuple(sorted((nb, graph.quality(node, nb))
                           for nb in graph.neighbors(node)))
    links = {k: q for k, q in graph.links.items() if node not in k}
    alive = tuple(a and n != node for n, a in enumerate(graph.alive))
    return (graph.copy_with(links, alive=alive),
            ChangeRecord("kill_node", node, links=removed))


def _add_node(graph, links=()):
    node = graph.node_count
    alive = graph.alive + (True,)
    new_links = dict(graph.links)
    g = Graph(node + 1, new_links, alive)
    attached = []
    for nb, rtt, bw in links:
        q = LinkQuality(rtt, bw)
        g._add_link(node, nb, q)
        attached.append((nb, q))
    return g, ChangeRecord("add_node", node, links=tuple(sorted(attached)))


_MUTATIONS = {
    "worsen_link": _worsen_link,
    "improve_link": _improve_link,
    "break_link": _break_link,
    "new_link": _new_link,
    "kill_node": _kill_node,
    "add_node": _add_node,
}


def inverse_mutation(record: ChangeRecord) -> tuple[str, dict]:
    """The (kind, args) that undoes `record`; mutate-then-inverse is identity."""
    if record.kind == "worsen_link":
        return "improve_link", {"u": record.u, "v": record.v,
                                "rtt": record.old.rtt, "bw": record.old.bw}
    if record.kind == "improve_link":
        return "worsen_link", {"u": record.u, "v": record.v,
                               "rtt": record.old.rtt, "bw": record.old.bw}
    if record.kind == "break_link":
        return "new_link", {"u": record.u, "v": record.v,
                            "rtt": record.old.rtt, "bw": record.old.bw}
    if record.kind == "new_link":
        return "break_link", {"u": record.u, "v": record.v}
    if record.kind == "kill_node":
        raise GraphError("kill_node is not invertible (node ids are dense)")
    if record.kind == "add_node":
        raise GraphError("add_node is not invertible (node ids are dense)")
    raise GraphError(f"unknown record kind {record.kind!r}")


# -- text format -----------------------------------------------------------

def format_graph_text(graph: Graph) -> str:
    """Serialize to the interchange format: "nodes N" then "u v rtt bw" lines."""
    out = [f"nodes {graph.node_count}"]
    for (u, v), q in sorted(graph.links.items()):
        out.append(f"{u} {v} {q.rtt:g} {q.bw:g}")
    return "\n".join(out) + "\n"


def parse_graph_text(text: str) -> Graph:
    """Parse the interchange format; '#' starts a comment, blank lines skipped."""
    node_count = None
    links: dict[tuple[int, int], LinkQuality] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if node_count is None:
            if parts[0] != "nodes" or len(parts) != 2:
                raise GraphParseError(lineno, "expected header 'nodes N'")
            try:
                node_count = int(parts[1])
            except ValueError:
                raise GraphParseError(lineno, f"bad node count {parts[1]!r}")
            continue
        if len(parts) != 4:
            raise GraphParseError(lineno, "expected 'u v rtt bw'")
        try:
            u, v = int(parts[0]), int(parts[1])
            q = LinkQuality(float(parts[2]), float(parts[3]))
        except (ValueError, GraphError) as exc:
            raise GraphParseError(lineno, str(exc))
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise GraphParseError(lineno, f"node out of range in link {u}-{v}")
        if _key(u, v) in links:
            raise GraphParseError(lineno, f"duplicate link {u}-{v}")
        links[_key(u, v)] = q
    if node_count is None:
        raise GraphParseError(1, "missing 'nodes N' header")
    return Graph(node_count, links)


def load_graph(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_text(fh.read())
