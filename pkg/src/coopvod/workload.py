"""Seeded Poisson request traces and their CSV file format.

A trace file starts with one ``#`` header line carrying the generation
parameters, then a column header and one ``time_min,group,proxy,video`` row
per request.  Times are written with 17 significant digits so a saved trace
reloads bit-for-bit.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .catalog import PopularityModel
from .topology import Topology

COLUMNS = ("time_min", "group", "proxy", "video")


class Request(NamedTuple):
    arrival_time_min: float
    group: int
    proxy: int
    video_id: int


class TraceFormatError(ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass
class Trace:
    requests: list[Request]
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.requests == other.requests and self.seed == other.seed
                and self.params == other.params)


def generate_trace(popularity: PopularityModel, topology: Topology, total_rate: float,
                   duration_min: float, seed: int,
                   proxy_weights: Optional[Sequence[float]] = None) -> Trace:
    """Homogeneous Poisson arrivals of rate ``total_rate`` per minute.

    Each request picks video ``i`` with probability ``p_i`` and a proxy
    uniformly over all ``J*M`` proxies, or by ``proxy_weights`` (ordered
    group by group) when given.  The result depends only on the arguments.
    """
    n_proxies = topology.j_groups * topology.m_proxies
    if n_proxies < 1:
        raise ValueError("topology has no proxies")
    if not total_rate > 0:
        raise ValueError(f"total_rate must be > 0, got {total_rate}")
    if duration_min < 0:
        raise ValueError(f"duration must be >= 0, got {duration_min}")
    params = {"total_rate": float(total_rate), "duration_min": float(duration_min),
              "n_videos": len(popularity.weights), "alpha": popularity.alpha,
              "j_groups": topology.j_groups, "m_proxies": topology.m_proxies}
    if proxy_weights is not None:
        pw = np.asarray(proxy_weights, dtype=float)
        if pw.shape != (n_proxies,) or (pw < 0).any() or pw.sum() <= 0:
            raise ValueError(f"proxy_weights needs {n_proxies} nonnegative entries")
        pw = pw / pw.sum()
        params["proxy_weights"] = [float(x) for x in proxy_weights]
    else:
        pw = None

    rng = np.random.default_rng(seed)
    times = _poisson_times(rng, total_rate, duration_min)
    n = len(times)
    p = np.asarray(popularity.weights, dtype=float)
    videos = rng.choice(len(p), size=n, p=p / p.sum()) + 1
    if pw is None:
        flat = rng.integers(0, n_proxies, size=n)
    else:
        flat = rng.choice(n_proxies, size=n, p=pw)
    groups = flat // topology.m_proxies + 1
    proxies = flat % topology.m_proxies + 1
    requests = [Request(float(t), int(g), int(q), int(v))
                for t, g, q, v in zip(times, groups, proxies, videos)]
    return Trace(requests, seed=seed, params=params)


def _poisson_times(rng, rate, duration):
    if duration == 0:
        return np.empty(0)
    expected = rate * duration
    chunk = int(expected + 6 * math.sqrt(expected) + 16)
    parts, t0 = [], 0.0
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        t = t0 + np.cumsum(gaps)
        inside = t[t <= duration]
        parts.append(inside)
        if len(inside) < len(t):
            break
        t0 = float(t[-1])
    return np.concatenate(parts)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _header_line(trace: Trace) -> str:
    items = [f"seed={trace.seed}"]
    for k in sorted(trace.params):
        v = trace.params[k]
        if isinstance(v, list):
            v = ";".join(_fmt(x) for x in v)
        elif isinstance(v, float):
            v = _fmt(v)
        items.append(f"{k}={v}")
    return "# coopvod-trace " + " ".join(items)


def dumps_trace(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(_header_line(trace) + "\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(COLUMNS)
    for r in trace.requests:
        out.writerow((_fmt(r.arrival_time_min), r.group, r.proxy, r.video_id))
    return buf.getvalue()


def save_trace(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_trace(trace))


def _parse_value(raw: str):
    if raw == "None":
        return None
    if ";" in raw:
        return [float(x) for x in raw.split(";")]
    try:
        return int(raw)
    except ValueError:
        return float(raw)


def loads_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# coopvod-trace"):
        raise TraceFormatError("missing '# coopvod-trace' header line", 1)
    seed, params = None, {}
    for item in lines[0].split()[2:]:
        key, sep, raw = item.partition("=")
        if not sep:
            raise TraceFormatError(f"bad header item {item!r}", 1)
        try:
            value = _parse_value(raw)
        except ValueError:
            raise TraceFormatError(f"bad header value {item!r}", 1) from None
        if key == "seed":
            seed = value
        else:
            if key in ("total_rate", "duration_min", "alpha") and isinstance(value, int):
                value = float(value)
            if key == "proxy_weights" and isinstance(value, (int, float)):
                value = [float(value)]
            params[key] = value
    if len(lines) < 2 or tuple(lines[1].split(",")) != COLUMNS:
        raise TraceFormatError(f"expected column header {','.join(COLUMNS)}", 2)

    requests = []
    last = -math.inf
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(row)}", lineno)
        try:
            req = Request(float(row[0]), int(row[1]), int(row[2]), int(row[3]))
        except ValueError:
            raise TraceFormatError(f"unparsable row {','.join(row)!r}", lineno) from None
        if not req.arrival_time_min >= 0 or req.group < 1 or req.proxy < 1 \
                or req.video_id < 1:
            raise TraceFormatError("negative time or non-positive index", lineno)
        if req.arrival_time_min < last:
            raise TraceFormatError(
                f"arrival {row[0]} earlier than previous request", lineno)
        last = req.arrival_time_min
        requests.append(req)
    return Trace(requests, seed=seed, params=params)


def load_trace(path) -> Trace:
    with open(path, newline="") as fh:
        return loads_trace(fh.read())
