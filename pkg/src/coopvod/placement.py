"""Popularity-proportional prefix sizing and per-group prefix placement.

Each group of M proxies caches a prefix ``W_i`` of some videos, every prefix
on exactly one proxy of the group.  Prefix lengths follow popularity:

    W_i = clamp(round(M * B * p_i / sum(p)), w_min, min(w_max, S_i, B))

taken over the videos offered to the group, most popular first, until the
group's ``M * B`` minutes are used up.

The allocator fills bins one after another in decreasing size order and
makes each bin exactly full before moving on; ``assign_to_proxies`` follows
that plan.  The smallest prefix it hands out is the tile size
``B / floor(B / w_min)``.  When the next prefix does not fit, it is shrunk to
the bin's leftover if that is at least the tile size; otherwise the leftover
is spread over the bin's shortest prefixes.  Only if that is impossible does
the bin receive a short "tail" prefix of the next uncached video.  Finally the
packed sizes are matched to videos by popularity, so a more popular video
never gets a shorter prefix than a less popular one of the same length.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .catalog import Catalog, PopularityModel
from .errors import ConfigError
from .topology import Topology

EPS = 1e-9

PLACEMENT_MODES = ("partitioned", "replicated", "disjoint")

#: proxy index used for the tracker when it acts as an extra cache bin
TRACKER_BIN = 0


@dataclass
class PrefixAllocation:
    """Cached prefix lengths for one group.

    ``w`` maps video id to cached minutes and holds cached videos only.
    ``bins`` is the packing the allocator planned (bin position, not proxy
    index); hand-built allocations may leave it empty.
    """

    w: dict[int, float]
    b_minutes: float
    m_proxies: int
    bins: list[list[int]] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.w.values())

    @property
    def capacity(self) -> float:
        return self.m_proxies * self.b_minutes

    @property
    def k_per_proxy(self) -> list[int]:
        return [len(b) for b in self.bins]

    @property
    def utilization(self) -> float:
        return self.total / self.capacity


def _round_half_up(x: float) -> float:
    return float(math.floor(x + 0.5))


def allocate_prefixes(
    catalog: Catalog,
    popularity: PopularityModel,
    b_minutes: float,
    m_proxies: int,
    w_min: float,
    w_max: float,
    video_ids: Optional[Iterable[int]] = None,
) -> PrefixAllocation:
    """Size the cached prefixes for one group of ``m_proxies`` cache bins.

    Parameters
    ----------
    catalog, popularity
        The video population and its Zipf weights.
    b_minutes : float
        Buffer of each bin, in minutes of video.
    m_proxies : int
        Number of bins (proxies, plus the tracker when it caches).
    w_min, w_max : float
        Clamp range for a prefix.  Videos shorter than ``w_min`` are cached
        whole.
    video_ids : iterable of int, optional
        Subset of videos offered to this group; defaults to the whole
        catalog.  Proportional shares are normalised over this subset.

    Raises
    ------
    ConfigError
        If the most popular offered video cannot be cached at ``w_min``.
    """
    if not b_minutes > 0:
        raise ConfigError(f"buffer must be > 0 minutes, got {b_minutes}", key="b_minutes")
    if m_proxies < 1:
        raise ConfigError(f"need at least one cache bin, got {m_proxies}", key="M")
    if not 0 < w_min <= w_max:
        raise ConfigError(f"need 0 < w_min <= w_max, got [{w_min}, {w_max}]", key="w_min")

    ids = sorted(video_ids) if video_ids is not None else [v.id for v in catalog]
    if not ids:
        return PrefixAllocation({}, b_minutes, m_proxies, [[] for _ in range(m_proxies)])
    total_p = math.fsum(popularity.weight(i) for i in ids)
    capacity = m_proxies * b_minutes
    # smallest prefix that tiles a bin exactly, so bins of tail videos close cleanly
    per_bin = math.floor(b_minutes / w_min + EPS)
    lo_tile = min(b_minutes / per_bin, w_max) if per_bin >= 1 else w_min

    def bounds(vid):
        hi = min(w_max, catalog.length(vid), b_minutes)
        return min(lo_tile, hi), hi

    first = min(ids, key=lambda v: (-popularity.weight(v), v))
    if min(w_min, catalog.length(first)) > b_minutes + EPS:
        raise ConfigError(
            f"buffer of {b_minutes} min cannot hold video {first} at w_min={w_min}",
            key="b_minutes")

    share = {v: capacity * popularity.weight(v) / total_p for v in ids}
    target = {}
    for vid in ids:
        lo, hi = bounds(vid)
        target[vid] = min(max(_round_half_up(share[vid]), lo), hi)
    if math.fsum(target.values()) >= capacity - EPS:
        w, bins = _fill_bins(target, bounds, b_minutes, m_proxies)
    else:
        w, bins = _stretched_fill(share, bounds, b_minutes, m_proxies)
    if math.fsum(w.values()) < capacity - 1.0 and len(w) == len(ids):
        # every offered video is in, yet room is left: try spreading them evenly
        alt = _balanced_fill(share, bounds, b_minutes, m_proxies)
        if alt is not None and math.fsum(alt[0].values()) > math.fsum(w.values()) + EPS:
            w, bins = alt
    w, bins = _by_popularity(w, bins, popularity, bounds)
    return PrefixAllocation(w, float(b_minutes), m_proxies, bins)


def _by_popularity(w, bins, popularity, bounds):
    """Hand the packed slot sizes back out so that, among videos with the same
    cap, a more popular video never holds a shorter prefix.  Bin loads are
    unchanged because only the labels of equal-cap slots move."""
    slot_of = {vid: k for k, members in enumerate(bins) for vid in members}
    by_cap: dict[float, list[int]] = {}
    for vid in w:
        by_cap.setdefault(bounds(vid)[1], []).append(vid)
    new_w, new_bins = {}, [[] for _ in bins]
    for vids in by_cap.values():
        slots = sorted(((w[v], slot_of[v]) for v in vids), key=lambda s: (-s[0], s[1]))
        ranked = sorted(vids, key=lambda v: (-popularity.weight(v), v))
        for vid, (size, k) in zip(ranked, slots):
            new_w[vid] = size
            new_bins[k].append(vid)
    return new_w, [sorted(members) for members in new_bins]


def _fill_bins(target, bounds, b_minutes, m_proxies):
    """Fill bins one by one in decreasing target order; see the module notes."""
    order = sorted(target, key=lambda v: (-target[v], v))
    w: dict[int, float] = {}
    bins: list[list[int]] = [[] for _ in range(m_proxies)]
    leftover = [float(b_minutes)] * m_proxies
    pos = 0
    for k in range(m_proxies):
        while pos < len(order):
            vid = order[pos]
            lo, hi = bounds(vid)
            size = target[vid]
            if size <= leftover[k] + EPS:
                pass
            elif leftover[k] >= lo - EPS:
                size = leftover[k]
            else:
                break
            w[vid] = size
            bins[k].append(vid)
            leftover[k] -= size
            pos += 1
            if leftover[k] <= EPS:
                break
        if leftover[k] > EPS and bins[k]:
            leftover[k] = _fill_from_bottom(bins[k], w, leftover[k], bounds)
        if leftover[k] <= EPS:
            leftover[k] = 0.0
        if pos >= len(order):
            break

    # close remaining gaps with short tail prefixes, largest gap first
    gaps = sorted((k for k in range(m_proxies) if leftover[k] >= 1.0 - EPS and bins[k]),
                  key=lambda k: (-leftover[k], k))
    for k in gaps:
        if pos >= len(order):
            break
        vid = order[pos]
        size = min(leftover[k], bounds(vid)[1])
        w[vid] = size
        bins[k].append(vid)
        leftover[k] -= size
        pos += 1
    return w, bins


def _stretched_fill(share, bounds, b_minutes, m_proxies, steps=60):
    """Fill for catalogs too small for the rounded shares to use the capacity.

    Shares are scaled up until their clamped sum reaches the capacity, then
    further in small steps while that improves the packed total (the
    decreasing-size rule can strand a few minutes at the smallest scale).
    """
    capacity = m_proxies * b_minutes

    def sized(c):
        return {v: min(max(c * s, bounds(v)[0]), bounds(v)[1]) for v, s in share.items()}

    if math.fsum(sized(1e12).values()) <= capacity:
        return _fill_bins(sized(1e12), bounds, b_minutes, m_proxies)
    low, high = 1.0, 2.0
    while math.fsum(sized(high).values()) < capacity:
        high *= 2
    for _ in range(100):
        mid = (low + high) / 2
        if math.fsum(sized(mid).values()) < capacity:
            low = mid
        else:
            high = mid
    best, best_total = None, -1.0
    for i in range(steps):
        w, bins = _fill_bins(sized(high * (1 + 0.02 * i)), bounds, b_minutes, m_proxies)
        total = math.fsum(w.values())
        if total > best_total + EPS:
            best, best_total = (w, bins), total
        if best_total >= capacity - EPS:
            break
    return best


def _balanced_fill(share, bounds, b_minutes, m_proxies):
    """Pack every video, spreading the largest caps first over the bins, then
    size each bin to exactly ``B`` with one proportional level per bin.
    Returns ``None`` if some video does not fit even at its minimum."""
    bins: list[list[int]] = [[] for _ in range(m_proxies)]
    lo_sum = [0.0] * m_proxies
    hi_sum = [0.0] * m_proxies
    for vid in sorted(share, key=lambda v: (-bounds(v)[1], -share[v], v)):
        lo, hi = bounds(vid)
        room = [k for k in range(m_proxies) if lo_sum[k] + lo <= b_minutes + EPS]
        if not room:
            return None
        k = min(room, key=lambda k: (hi_sum[k], k))
        bins[k].append(vid)
        lo_sum[k] += lo
        hi_sum[k] += hi
    w: dict[int, float] = {}
    for members in bins:
        def sized(c):
            return {v: min(max(c * share[v], bounds(v)[0]), bounds(v)[1]) for v in members}

        if math.fsum(bounds(v)[1] for v in members) <= b_minutes:
            w.update(sized(math.inf))
            continue
        low, high = 0.0, 1.0
        while math.fsum(sized(high).values()) < b_minutes:
            high *= 2
        for _ in range(100):
            mid = (low + high) / 2
            if math.fsum(sized(mid).values()) < b_minutes:
                low = mid
            else:
                high = mid
        w.update(sized(low))
    return w, bins


def _fill_from_bottom(members, w, leftover, bounds):
    """Raise the shortest prefixes of a bin to a common level to absorb
    ``leftover``; returns what could not be absorbed."""
    caps = {v: bounds(v)[1] for v in members}
    current = math.fsum(w[v] for v in members)
    goal = current + leftover

    def filled(level):
        return math.fsum(max(w[v], min(level, caps[v])) for v in members)

    top = max(caps.values())
    if filled(top) <= goal + EPS:
        level = top
    else:
        low, high = min(w[v] for v in members), top
        for _ in range(200):
            mid = (low + high) / 2
            if filled(mid) < goal:
                low = mid
            else:
                high = mid
        level = high
    for v in members:
        w[v] = max(w[v], min(level, caps[v]))
    rest = goal - math.fsum(w[v] for v in members)
    if abs(rest) <= EPS:
        return 0.0
    if rest < 0:
        # bisection overshoot: trim it from the largest raised prefix
        v = max(members, key=lambda x: (w[x], -x))
        w[v] += rest
        return 0.0
    return rest


@dataclass
class GroupDirectory:
    """A tracker's view of its group: which bin holds which prefix."""

    group: int
    n_videos: int
    entries: dict[int, tuple[int, float]] = field(default_factory=dict)
    by_proxy: dict[int, set[int]] = field(default_factory=dict)
    unplaced: list[int] = field(default_factory=list)

    def add(self, proxy_index: int, video_id: int, w_minutes: float):
        if video_id in self.entries:
            raise ConfigError(f"video {video_id} already cached in group {self.group}")
        self.entries[video_id] = (proxy_index, w_minutes)
        self.by_proxy.setdefault(proxy_index, set()).add(video_id)

    def load(self, proxy_index: int) -> float:
        return math.fsum(self.entries[v][1] for v in self.by_proxy.get(proxy_index, ()))

    @property
    def cached_minutes(self) -> float:
        return math.fsum(w for _, w in self.entries.values())


def lookup(directory: GroupDirectory, video_id: int) -> Optional[tuple[int, float]]:
    if not 1 <= video_id <= directory.n_videos:
        raise ValueError(f"unknown video id {video_id}")
    return directory.entries.get(video_id)


def assign_to_proxies(allocation: PrefixAllocation, m_proxies: int, *,
                      group: int = 1, n_videos: Optional[int] = None,
                      tracker_bin: bool = False) -> GroupDirectory:
    """Place prefixes into bins of ``B`` minutes, longest first.

    An allocation from ``allocate_prefixes`` carries its own packing plan,
    built by the same longest-first, lowest-bin-first rule while the sizes
    were chosen; it is followed as is.  Otherwise this is plain first-fit
    decreasing: longer prefixes go first, ties by video id, and the
    lowest-numbered bin that still has room wins.  Prefixes that fit nowhere
    are listed in ``unplaced`` and treated as uncached.  With ``tracker_bin``
    the last bin is the group tracker and is recorded under ``TRACKER_BIN``.
    """
    B = allocation.b_minutes
    for vid, size in allocation.w.items():
        if size > B + EPS:
            raise ConfigError(f"prefix of video {vid} ({size} min) exceeds buffer {B} min",
                              key="b_minutes")
    n_bins = m_proxies + (1 if tracker_bin else 0)
    if n_videos is None:
        n_videos = max(allocation.w, default=0)
    directory = GroupDirectory(group=group, n_videos=n_videos)

    def index(k):
        return TRACKER_BIN if tracker_bin and k == m_proxies else k + 1

    if _plan_fits(allocation, n_bins):
        for k, members in enumerate(allocation.bins):
            for vid in members:
                directory.add(index(k), vid, allocation.w[vid])
        return directory
    load = [0.0] * n_bins
    for vid, size in sorted(allocation.w.items(), key=lambda kv: (-kv[1], kv[0])):
        for k in range(n_bins):
            if load[k] + size <= B + EPS:
                load[k] += size
                directory.add(index(k), vid, size)
                break
        else:
            directory.unplaced.append(vid)
    return directory


def _plan_fits(allocation: PrefixAllocation, n_bins: int) -> bool:
    if len(allocation.bins) != n_bins:
        return False
    planned = [v for members in allocation.bins for v in members]
    if sorted(planned) != sorted(allocation.w) or len(set(planned)) != len(planned):
        return False
    return all(math.fsum(allocation.w[v] for v in members) <= allocation.b_minutes + EPS
               for members in allocation.bins)


def group_video_sets(n_videos: int, j_groups: int, mode: str) -> list[list[int]]:
    """Videos offered to each group's allocator.

    ``replicated`` offers the whole catalog to every group.  ``disjoint``
    deals videos round-robin over all J groups.  ``partitioned`` deals them
    round-robin over three classes and gives group ``p`` class ``(p-1) % 3``,
    so a group and its two tracker-ring neighbours together see every class
    whenever J is a multiple of 3.
    """
    everything = list(range(1, n_videos + 1))
    if mode == "replicated" or j_groups == 1:
        return [everything for _ in range(j_groups)]
    if mode == "disjoint":
        period = j_groups
    elif mode == "partitioned":
        period = min(3, j_groups)
    else:
        raise ConfigError(f"unknown placement mode {mode!r}", key="mode")
    return [[v for v in everything if (v - 1) % period == (g - 1) % period]
            for g in range(1, j_groups + 1)]


@dataclass
class Directory:
    """Per-group directories of a cooperative deployment."""

    groups: dict[int, GroupDirectory]
    allocations: dict[int, PrefixAllocation]
    mode: str
    tracker_cache: bool = False

    def group(self, g: int) -> GroupDirectory:
        return self.groups[g]

    def rows(self):
        for g in sorted(self.groups):
            d = self.groups[g]
            for vid in sorted(d.entries):
                q, w = d.entries[vid]
                yield g, q, vid, w


def build_placement(catalog: Catalog, popularity: PopularityModel, topology: Topology,
                    b_minutes: float, w_min: float, w_max: float,
                    mode: str = "partitioned", tracker_cache: bool = False) -> Directory:
    sets = group_video_sets(len(catalog), topology.j_groups, mode)
    n_bins = topology.m_proxies + (1 if tracker_cache else 0)
    groups, allocs = {}, {}
    cache = {}
    for g, vids in enumerate(sets, start=1):
        key = tuple(vids)
        if key not in cache:
            cache[key] = allocate_prefixes(catalog, popularity, b_minutes, n_bins,
                                           w_min, w_max, video_ids=vids)
        allocs[g] = cache[key]
        groups[g] = assign_to_proxies(allocs[g], topology.m_proxies, group=g,
                                      n_videos=len(catalog), tracker_bin=tracker_cache)
    return Directory(groups, allocs, mode, tracker_cache)


@dataclass
class SingleProxyPlacement:
    """Baseline: every proxy caches the same top videos on its own."""

    w: dict[int, float]
    n_videos: int
    b_minutes: float

    def lookup(self, video_id: int) -> Optional[float]:
        return self.w.get(video_id)


def build_single_proxy_placement(catalog: Catalog, popularity: PopularityModel,
                                 b_minutes: float, w_min: float,
                                 w_max: float) -> SingleProxyPlacement:
    alloc = allocate_prefixes(catalog, popularity, b_minutes, 1, w_min, w_max)
    return SingleProxyPlacement(dict(alloc.w), len(catalog), float(b_minutes))


PLACEMENT_HEADER = ("group", "proxy", "video_id", "w_minutes")


def dump_placement(directory: Directory, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(PLACEMENT_HEADER)
        for g, q, vid, w in directory.rows():
            out.writerow((g, q, vid, repr(float(w))))


def load_placement(path, n_videos: int, j_groups: int, m_proxies: int) -> Directory:
    """Read a placement table written by ``dump_placement``.

    Allocation plans are not stored, so ``allocations`` of the result are
    rebuilt from the table with empty bin plans.
    """
    groups = {g: GroupDirectory(group=g, n_videos=n_videos) for g in range(1, j_groups + 1)}
    tracker_cache = False
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != PLACEMENT_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(PLACEMENT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                g, q, vid, w = int(row[0]), int(row[1]), int(row[2]), float(row[3])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
            if g not in groups or not 0 <= q <= m_proxies or not 1 <= vid <= n_videos \
                    or not w > 0:
                raise ValueError(f"{path}:{lineno}: row out of range {row!r}")
            tracker_cache |= q == TRACKER_BIN
            groups[g].add(q, vid, w)
    allocs = {g: PrefixAllocation({v: w for v, (_, w) in d.entries.items()},
                                  b_minutes=max([d.load(q) for q in d.by_proxy] or [1.0]),
                                  m_proxies=m_proxies)
              for g, d in groups.items()}
    return Directory(groups, allocs, mode="loaded", tracker_cache=tracker_cache)
