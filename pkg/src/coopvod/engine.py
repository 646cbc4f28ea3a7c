"""Discrete-event core: route each request to a serving tier, admit it against
link capacities, and hold its links for the length of the video.

Routing follows a fixed priority.  A request at proxy ``q`` of group ``p``
is served by

1. ``q`` itself when it caches the video,
2. a proxy-ring neighbour of ``q``,
3. any other cache of group ``p`` (via the shortest proxy-ring arc),
4. the left, then the right neighbour group on the tracker ring,
5. the CMS.

Partially cached videos stream their prefix from the serving cache and the
remaining ``S - W`` minutes from the CMS to ``q``; that suffix fetch also
occupies the CMS link of ``q``.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from .catalog import Catalog
from .errors import ConfigError
from .metrics import MetricsReport, SessionOutcome, record
from .placement import TRACKER_BIN, Directory, SingleProxyPlacement
from .topology import (CMS, Link, LinkKind, NodeRef, ServingTier, Topology,
                       is_ring_neighbor, proxy, tracker)
from .workload import Request, Trace

__all__ = ["ServingTier", "EngineConfig", "StreamSession", "LinkCapacityState",
           "EventQueue", "classify", "classify_single_proxy", "startup_delay_ms",
           "admit", "run", "DELAY_MODELS", "UNLIMITED"]

DELAY_MODELS = ("pipelined", "literal")
MODES = ("cooperative", "single_proxy")
UNLIMITED = None

DEFAULT_CAPACITY = 512


def _default_capacity():
    return {k: DEFAULT_CAPACITY for k in LinkKind}


@dataclass
class EngineConfig:
    b_rate: float = 2.0
    delay_model: str = "pipelined"
    capacity: dict = field(default_factory=_default_capacity)
    bucket_min: float = 10.0
    mode: str = "cooperative"
    audit: bool = False
    keep_sessions: bool = False

    def __post_init__(self):
        if not self.b_rate > 0:
            raise ConfigError(f"b_rate must be > 0, got {self.b_rate}", key="b_rate")
        if self.delay_model not in DELAY_MODELS:
            raise ConfigError(f"unknown delay model {self.delay_model!r}", key="delay_model")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}", key="mode")
        if not self.bucket_min > 0:
            raise ConfigError("bucket_min must be > 0", key="bucket_min")
        for kind in LinkKind:
            c = self.capacity.get(kind, UNLIMITED)
            if c is not UNLIMITED and c < 0:
                raise ConfigError(f"capacity of {kind.value} must be >= 0",
                                  key=f"capacity_{kind.value}")


@dataclass
class StreamSession:
    request: Request
    tier: ServingTier
    serving: NodeRef
    path: tuple
    links: tuple  # every link held: the path plus the suffix-fetch CMS link
    start_delay_ms: float
    start_min: float
    end_min: float
    minutes_from_group: float
    minutes_from_cms: float
    cost: float


class LinkCapacityState:
    """Concurrent-stream counters per link, with per-kind capacity."""

    def __init__(self, capacity: dict):
        self.capacity = {k: capacity.get(k, UNLIMITED) for k in LinkKind}
        self.active: dict[Link, int] = {}
        self.peak: dict[LinkKind, int] = {k: 0 for k in LinkKind}

    def limit(self, link: Link):
        return self.capacity[link.kind]

    def has_room(self, links) -> bool:
        for lk in links:
            c = self.capacity[lk.kind]
            if c is not UNLIMITED and self.active.get(lk, 0) >= c:
                return False
        return True

    def acquire(self, links):
        for lk in links:
            n = self.active.get(lk, 0) + 1
            self.active[lk] = n
            if n > self.peak[lk.kind]:
                self.peak[lk.kind] = n

    def release(self, links):
        for lk in links:
            n = self.active[lk] - 1
            if n < 0:
                raise AssertionError(f"negative stream count on {lk}")
            if n:
                self.active[lk] = n
            else:
                del self.active[lk]

    def violations(self) -> list[Link]:
        return [lk for lk, n in self.active.items()
                if self.capacity[lk.kind] is not UNLIMITED and n > self.capacity[lk.kind]]


class EventQueue:
    """Time-ordered events; equal times leave in insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, kind: str, payload=None):
        heapq.heappush(self._heap, (time, next(self._seq), kind, payload))

    def pop(self):
        time, _, kind, payload = heapq.heappop(self._heap)
        return time, kind, payload


def classify(request: Request, directory: Directory,
             topology: Topology) -> tuple[ServingTier, NodeRef, float]:
    """Return ``(tier, serving node, cached prefix minutes)`` for a request.

    The prefix is 0 for a CMS fetch.
    """
    g, q, v = request.group, request.proxy, request.video_id
    hit = directory.groups[g].entries.get(v)
    if hit is not None:
        holder, w = hit
        if holder == q:
            return ServingTier.LOCAL_HIT, proxy(g, q), w
        if holder != TRACKER_BIN and is_ring_neighbor(topology.m_proxies, holder, q):
            return ServingTier.NEIGHBOR_PROXY, proxy(g, holder), w
        node = tracker(g) if holder == TRACKER_BIN else proxy(g, holder)
        return ServingTier.INTRA_GROUP_REMOTE, node, w
    for ng in topology.neighbor_groups(g):
        hit = directory.groups[ng].entries.get(v)
        if hit is not None:
            holder, w = hit
            node = tracker(ng) if holder == TRACKER_BIN else proxy(ng, holder)
            return ServingTier.NEIGHBOR_GROUP, node, w
    return ServingTier.CMS_FETCH, CMS, 0.0


def classify_single_proxy(request: Request, placement: SingleProxyPlacement):
    w = placement.lookup(request.video_id)
    if w is not None:
        return ServingTier.LOCAL_HIT, proxy(request.group, request.proxy), w
    return ServingTier.CMS_FETCH, CMS, 0.0


def startup_delay_ms(tier: ServingTier, path, w_min: float, s_min: float, b_rate: float,
                     delay_model: str, topology: Topology) -> float:
    """Startup latency of a session.

    ``literal`` waits for the whole CMS part, ``(S - W) / b`` minutes, on top
    of the path delay.  ``pipelined`` lets the CMS part download while the
    prefix plays and only waits for what the prefix cannot cover:
    ``max(0, (S - W) / b - W)`` minutes.  A CMS fetch has ``W = 0``.
    """
    if not b_rate > 0:
        raise ValueError(f"b_rate must be > 0, got {b_rate}")
    if tier is ServingTier.CMS_FETCH:
        w_min = 0.0
    base = topology.path_delay_ms(path)
    remote = max(0.0, s_min - w_min)
    if remote <= 0:
        return base
    fetch = remote / b_rate
    if delay_model == "literal":
        return base + fetch * 60000.0
    if delay_model == "pipelined":
        return base + max(0.0, fetch - w_min) * 60000.0
    raise ValueError(f"unknown delay model {delay_model!r}")


def admit(session: StreamSession, state: LinkCapacityState, queue: Optional[EventQueue] = None) -> bool:
    """Reserve every link of ``session`` or leave ``state`` untouched."""
    if not state.has_room(session.links):
        return False
    state.acquire(session.links)
    if queue is not None:
        queue.push(session.end_min, "end", session)
    return True


def _build_session(req: Request, tier, serving, w, catalog, topology, cfg) -> StreamSession:
    s = catalog.length(req.video_id)
    requesting = proxy(req.group, req.proxy)
    path = topology.path_for_tier(tier, serving, requesting)
    if tier is ServingTier.CMS_FETCH:
        from_group, from_cms = 0.0, s
    else:
        from_group = min(w, s)
        from_cms = s - from_group
    cms_link = Link.between(LinkKind.CMS_PROXY, CMS, requesting)
    if tier is ServingTier.CMS_FETCH:
        links, cost = path, topology.path_cost(path, from_cms)
    else:
        links = path + ((cms_link,) if from_cms > 0 else ())
        cost = topology.path_cost(path, from_group)
        if from_cms > 0:
            cost += from_cms * (topology.cost_per_min(LinkKind.CMS_PROXY)
                                + topology.cost_per_min(LinkKind.PROXY_CLIENT))
    delay = startup_delay_ms(tier, path, from_group, s, cfg.b_rate, cfg.delay_model, topology)
    return StreamSession(request=req, tier=tier, serving=serving, path=path, links=links,
                         start_delay_ms=delay, start_min=req.arrival_time_min,
                         end_min=req.arrival_time_min + s, minutes_from_group=from_group,
                         minutes_from_cms=from_cms, cost=cost)


def _validate(trace: Trace, topology: Topology, placement, catalog: Catalog, cfg):
    n = len(catalog)
    if cfg.mode == "cooperative":
        if not isinstance(placement, Directory):
            raise ConfigError("cooperative mode needs a per-group Directory", key="mode")
        if sorted(placement.groups) != list(range(1, topology.j_groups + 1)):
            raise ConfigError("directory groups do not match the topology", key="J")
        for g, d in placement.groups.items():
            for vid, (q, w) in d.entries.items():
                if not 1 <= vid <= n:
                    raise ConfigError(f"group {g} caches unknown video {vid}")
                if q == TRACKER_BIN and not placement.tracker_cache:
                    raise ConfigError(f"group {g} caches on its tracker but tracker "
                                      "caching is off", key="tracker_cache")
                if not 0 <= q <= topology.m_proxies:
                    raise ConfigError(f"group {g} uses proxy {q} beyond M", key="M")
                if not w > 0:
                    raise ConfigError(f"group {g} caches video {vid} with W={w}")
    else:
        if not isinstance(placement, SingleProxyPlacement):
            raise ConfigError("single_proxy mode needs a SingleProxyPlacement", key="mode")
        if any(not 1 <= v <= n for v in placement.w):
            raise ConfigError("single-proxy cache holds unknown videos")
    for i, r in enumerate(trace.requests):
        if not (1 <= r.group <= topology.j_groups and 1 <= r.proxy <= topology.m_proxies
                and 1 <= r.video_id <= n):
            raise ConfigError(f"request {i} references an unknown proxy or video")


@dataclass
class RunResult:
    report: MetricsReport
    sessions: list = field(default_factory=list)
    audit_violations: int = 0


def run(trace: Trace, topology: Topology, placement: Union[Directory, SingleProxyPlacement],
        catalog: Catalog, config: Optional[EngineConfig] = None) -> MetricsReport:
    return simulate(trace, topology, placement, catalog, config).report


def simulate(trace: Trace, topology: Topology,
             placement: Union[Directory, SingleProxyPlacement], catalog: Catalog,
             config: Optional[EngineConfig] = None) -> RunResult:
    """Process every arrival and session end in time order.

    With ``config.audit`` every link counter is checked against its capacity
    after each event; violations are counted in the result.  With
    ``config.keep_sessions`` admitted sessions are kept for inspection.
    """
    cfg = config or EngineConfig()
    _validate(trace, topology, placement, catalog, cfg)
    cooperative = cfg.mode == "cooperative"
    report = MetricsReport(bucket_min=cfg.bucket_min)
    state = LinkCapacityState(cfg.capacity)
    queue = EventQueue()
    result = RunResult(report)
    for req in trace.requests:
        queue.push(req.arrival_time_min, "arrival", req)

    while queue:
        now, kind, payload = queue.pop()
        if kind == "end":
            state.release(payload.links)
        else:
            req = payload
            if cooperative:
                tier, serving, w = classify(req, placement, topology)
            else:
                tier, serving, w = classify_single_proxy(req, placement)
            session = _build_session(req, tier, serving, w, catalog, topology, cfg)
            if admit(session, state, queue):
                record(report, SessionOutcome(
                    time_min=now, tier=tier, delay_ms=session.start_delay_ms,
                    minutes_from_group=session.minutes_from_group,
                    minutes_from_cms=session.minutes_from_cms, cost=session.cost,
                    suffix_fetch=tier is not ServingTier.CMS_FETCH
                    and session.minutes_from_cms > 0))
                if cfg.keep_sessions:
                    result.sessions.append(session)
            else:
                record(report, SessionOutcome(time_min=now, tier=None))
        if cfg.audit:
            result.audit_violations += len(state.violations())

    report.peak_link_load = {k.value: n for k, n in state.peak.items()}
    report.check_conservation()
    return result
