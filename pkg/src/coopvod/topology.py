"""Two-level ring topology: a CMS, a ring of trackers, and per-group proxy rings.

Proxies of group ``p`` are numbered ``1..M`` and form a cycle; trackers of
groups ``1..J`` form a second cycle.  Every proxy hangs off its group tracker
and has a direct logical link to the CMS.  Clients are not modelled as nodes:
each proxy's client population sits behind a single ProxyClient link.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional


class NodeKind(enum.Enum):
    CMS = "cms"
    TRACKER = "tracker"
    PROXY = "proxy"
    CLIENT = "client"


class NodeRef(NamedTuple):
    kind: NodeKind
    group: Optional[int] = None
    index: Optional[int] = None

    def __str__(self):
        if self.kind is NodeKind.CMS:
            return "CMS"
        if self.kind is NodeKind.TRACKER:
            return f"TR{self.group}"
        prefix = "PS" if self.kind is NodeKind.PROXY else "C"
        return f"{prefix}{self.group}.{self.index}"


CMS = NodeRef(NodeKind.CMS)


def tracker(group: int) -> NodeRef:
    return NodeRef(NodeKind.TRACKER, group)


def proxy(group: int, index: int) -> NodeRef:
    return NodeRef(NodeKind.PROXY, group, index)


def clients(group: int, index: int) -> NodeRef:
    return NodeRef(NodeKind.CLIENT, group, index)


class LinkKind(enum.Enum):
    PROXY_CLIENT = "proxy_client"
    PROXY_PROXY = "proxy_proxy"
    TRACKER_PROXY = "tracker_proxy"
    TRACKER_TRACKER = "tracker_tracker"
    CMS_PROXY = "cms_proxy"


class ServingTier(enum.Enum):
    """Which routing case served a request, in priority order."""

    LOCAL_HIT = "local_hit"
    NEIGHBOR_PROXY = "neighbor_proxy"
    INTRA_GROUP_REMOTE = "intra_group_remote"
    NEIGHBOR_GROUP = "neighbor_group"
    CMS_FETCH = "cms_fetch"


class Direction(enum.Enum):
    CLOCKWISE = "clockwise"
    COUNTERCLOCKWISE = "counterclockwise"


def _node_key(n: NodeRef):
    return (list(NodeKind).index(n.kind), n.group or 0, n.index or 0)


class Link(NamedTuple):
    kind: LinkKind
    a: NodeRef
    b: NodeRef

    @classmethod
    def between(cls, kind: LinkKind, u: NodeRef, v: NodeRef) -> "Link":
        # undirected: one canonical endpoint order per physical edge
        if _node_key(v) < _node_key(u):
            u, v = v, u
        return cls(kind, u, v)

    def __str__(self):
        return f"{self.kind.value}({self.a}-{self.b})"


Path = tuple[Link, ...]

DEFAULT_DELAY_MS = {
    LinkKind.PROXY_CLIENT: 100.0,
    LinkKind.PROXY_PROXY: 200.0,
    LinkKind.TRACKER_PROXY: 200.0,
    LinkKind.TRACKER_TRACKER: 300.0,
    LinkKind.CMS_PROXY: 1200.0,
}

# abstract units per delivered video-minute per hop, roughly proportional to delay
DEFAULT_COST_PER_MIN = {
    LinkKind.PROXY_CLIENT: 1.0,
    LinkKind.PROXY_PROXY: 2.0,
    LinkKind.TRACKER_PROXY: 2.0,
    LinkKind.TRACKER_TRACKER: 3.0,
    LinkKind.CMS_PROXY: 12.0,
}


@dataclass(frozen=True)
class DelayCostTable:
    delay_ms: dict = field(default_factory=lambda: dict(DEFAULT_DELAY_MS))
    cost_per_min: dict = field(default_factory=lambda: dict(DEFAULT_COST_PER_MIN))

    def __post_init__(self):
        for name, table in (("delay_ms", self.delay_ms),
                            ("cost_per_min", self.cost_per_min)):
            missing = set(LinkKind) - set(table)
            if missing:
                raise ValueError(f"{name} lacks entries for "
                                 f"{sorted(k.value for k in missing)}")
            for kind, value in table.items():
                if value < 0:
                    raise ValueError(f"{name}[{kind.value}] must be >= 0")

    def __hash__(self):
        return hash((tuple(sorted((k.value, v) for k, v in self.delay_ms.items())),
                     tuple(sorted((k.value, v) for k, v in self.cost_per_min.items()))))


def ring_distance(ring_size: int, from_index: int, to_index: int) -> tuple[int, Direction]:
    """Shortest arc between two positions of a 1-based ring.

    Ties (possible on even rings) go clockwise, i.e. towards ascending index.
    """
    for idx in (from_index, to_index):
        if not 1 <= idx <= ring_size:
            raise ValueError(f"ring index {idx} outside 1..{ring_size}")
    cw = (to_index - from_index) % ring_size
    ccw = (from_index - to_index) % ring_size
    if cw <= ccw:
        return cw, Direction.CLOCKWISE
    return ccw, Direction.COUNTERCLOCKWISE


def is_ring_neighbor(ring_size: int, a: int, b: int) -> bool:
    return ring_distance(ring_size, a, b)[0] == 1


def ring_arc(ring_size: int, from_index: int, to_index: int) -> list[int]:
    """Positions visited along the shortest arc, both endpoints included."""
    hops, direction = ring_distance(ring_size, from_index, to_index)
    step = 1 if direction is Direction.CLOCKWISE else -1
    return [(from_index - 1 + step * h) % ring_size + 1 for h in range(hops + 1)]


class Topology:
    """Immutable CMS / tracker-ring / proxy-ring graph with link tables."""

    def __init__(self, j_groups: int, m_proxies: int, table: DelayCostTable):
        self.j_groups = j_groups
        self.m_proxies = m_proxies
        self.table = table
        self._delay = {k: float(v) for k, v in table.delay_ms.items()}
        self._cost = {k: float(v) for k, v in table.cost_per_min.items()}
        self.links = self._build_links()
        self._adjacency = {}
        for link in self.links:
            self._adjacency.setdefault(link.a, set()).add(link.b)
            self._adjacency.setdefault(link.b, set()).add(link.a)

    def __repr__(self):
        return f"Topology(j_groups={self.j_groups}, m_proxies={self.m_proxies})"

    @property
    def n_proxies(self) -> int:
        return self.j_groups * self.m_proxies

    def nodes(self) -> list[NodeRef]:
        out = [CMS]
        for g in range(1, self.j_groups + 1):
            out.append(tracker(g))
            out.extend(proxy(g, q) for q in range(1, self.m_proxies + 1))
        return out

    def proxies(self):
        for g in range(1, self.j_groups + 1):
            for q in range(1, self.m_proxies + 1):
                yield g, q

    def neighbors(self, node: NodeRef) -> set[NodeRef]:
        return set(self._adjacency.get(node, ()))

    def proxy_ring_neighbors(self, group: int, index: int) -> set[int]:
        return {n.index for n in self.neighbors(proxy(group, index))
                if n.kind is NodeKind.PROXY}

    def neighbor_groups(self, group: int) -> list[int]:
        """Left then right neighbour on the tracker ring, without duplicates."""
        if self.j_groups == 1:
            return []
        left = (group - 2) % self.j_groups + 1
        right = group % self.j_groups + 1
        return [left] if left == right else [left, right]

    def _build_links(self) -> frozenset:
        J, M = self.j_groups, self.m_proxies
        links = set()
        for g in range(1, J + 1):
            for q in range(1, M + 1):
                links.add(Link.between(LinkKind.PROXY_CLIENT, proxy(g, q), clients(g, q)))
                links.add(Link.between(LinkKind.TRACKER_PROXY, tracker(g), proxy(g, q)))
                links.add(Link.between(LinkKind.CMS_PROXY, CMS, proxy(g, q)))
                if M > 1:
                    nxt = q % M + 1
                    links.add(Link.between(LinkKind.PROXY_PROXY, proxy(g, q), proxy(g, nxt)))
            if J > 1:
                links.add(Link.between(LinkKind.TRACKER_TRACKER, tracker(g),
                                       tracker(g % J + 1)))
        return frozenset(links)

    def link(self, kind: LinkKind, u: NodeRef, v: NodeRef) -> Link:
        lk = Link.between(kind, u, v)
        if lk not in self.links:
            raise ValueError(f"no {kind.value} link between {u} and {v}")
        return lk

    def _check_proxy(self, node: NodeRef):
        if (node.kind is not NodeKind.PROXY or not 1 <= node.group <= self.j_groups
                or not 1 <= node.index <= self.m_proxies):
            raise ValueError(f"{node} is not a proxy of this topology")

    def path_for_tier(self, tier: ServingTier, serving: NodeRef,
                      requesting: NodeRef) -> Path:
        self._check_proxy(requesting)
        return self._path(tier, serving, requesting)

    @lru_cache(maxsize=None)
    def _path(self, tier, serving, requesting) -> Path:
        g, q = requesting.group, requesting.index
        last = Link.between(LinkKind.PROXY_CLIENT, requesting, clients(g, q))

        if tier is ServingTier.LOCAL_HIT:
            if serving != requesting:
                raise ValueError(f"local hit must be served by {requesting}, not {serving}")
            return (last,)

        if tier is ServingTier.CMS_FETCH:
            if serving != CMS:
                raise ValueError("cms fetch must be served by the CMS")
            return (Link.between(LinkKind.CMS_PROXY, CMS, requesting), last)

        if tier is ServingTier.NEIGHBOR_PROXY:
            if serving.kind is not NodeKind.PROXY or serving.group != g \
                    or not is_ring_neighbor(self.m_proxies, serving.index, q):
                raise ValueError(f"{serving} is not a ring neighbour of {requesting}")
            return (Link.between(LinkKind.PROXY_PROXY, serving, requesting), last)

        if tier is ServingTier.INTRA_GROUP_REMOTE:
            if serving.group != g:
                raise ValueError(f"{serving} is outside group {g}")
            if serving.kind is NodeKind.TRACKER:
                return (Link.between(LinkKind.TRACKER_PROXY, serving, requesting), last)
            if serving.kind is not NodeKind.PROXY or serving.index == q:
                raise ValueError(f"{serving} cannot be a remote source for {requesting}")
            arc = ring_arc(self.m_proxies, serving.index, q)
            hops = tuple(Link.between(LinkKind.PROXY_PROXY, proxy(g, a), proxy(g, b))
                         for a, b in zip(arc, arc[1:]))
            return hops + (last,)

        if tier is ServingTier.NEIGHBOR_GROUP:
            src = serving.group
            if serving.kind not in (NodeKind.PROXY, NodeKind.TRACKER) or src is None \
                    or src == g or not 1 <= src <= self.j_groups:
                raise ValueError(f"{serving} is not in another group")
            links = []
            if serving.kind is NodeKind.PROXY:
                links.append(Link.between(LinkKind.TRACKER_PROXY, tracker(src), serving))
            arc = ring_arc(self.j_groups, src, g)
            links.extend(Link.between(LinkKind.TRACKER_TRACKER, tracker(a), tracker(b))
                         for a, b in zip(arc, arc[1:]))
            links.append(Link.between(LinkKind.TRACKER_PROXY, tracker(g), requesting))
            links.append(last)
            return tuple(links)

        raise ValueError(f"unknown tier {tier!r}")

    def path_delay_ms(self, path) -> float:
        return sum(self._delay[lk.kind] for lk in path)

    def path_cost(self, path, minutes_delivered: float) -> float:
        return minutes_delivered * sum(self._cost[lk.kind] for lk in path)

    def delay_ms(self, kind: LinkKind) -> float:
        return self._delay[kind]

    def cost_per_min(self, kind: LinkKind) -> float:
        return self._cost[kind]


def build_topology(j_groups: int, m_proxies: int,
                   delay_cost_table: Optional[DelayCostTable] = None) -> Topology:
    if j_groups < 1:
        raise ValueError(f"j_groups must be >= 1, got {j_groups}")
    if m_proxies < 1:
        raise ValueError(f"m_proxies must be >= 1, got {m_proxies}")
    return Topology(j_groups, m_proxies, delay_cost_table or DelayCostTable())
