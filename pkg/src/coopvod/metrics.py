"""Per-run counters, derived quality metrics and report export.

Video minutes are the block unit throughout: one block is one minute of
video.  ``vhr`` counts a request as a hit when it was served without a CMS
start (any tier but cms_fetch); rejected requests count as misses.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .topology import ServingTier

TIERS = tuple(t.value for t in ServingTier)

VHR_DEFINITION = ("vhr = requests served without a CMS start (tiers local_hit, "
                  "neighbor_proxy, intra_group_remote, neighbor_group) / all requests")


@dataclass
class SessionOutcome:
    """What the engine reports for one request."""

    time_min: float
    tier: Optional[ServingTier]  # None means rejected
    delay_ms: float = 0.0
    minutes_from_group: float = 0.0
    minutes_from_cms: float = 0.0
    cost: float = 0.0
    suffix_fetch: bool = False


@dataclass
class TierStats:
    count: int = 0
    delay_sum_ms: float = 0.0
    delay_min_ms: Optional[float] = None
    delay_max_ms: Optional[float] = None
    minutes: float = 0.0
    minutes_from_cms: float = 0.0
    cost: float = 0.0

    @property
    def mean_delay_ms(self) -> Optional[float]:
        return self.delay_sum_ms / self.count if self.count else None

    def to_dict(self):
        return {"count": self.count, "delay_sum_ms": self.delay_sum_ms,
                "delay_min_ms": self.delay_min_ms, "delay_max_ms": self.delay_max_ms,
                "mean_delay_ms": self.mean_delay_ms, "minutes": self.minutes,
                "minutes_from_cms": self.minutes_from_cms, "cost": self.cost}

    @classmethod
    def from_dict(cls, d):
        return cls(count=d["count"], delay_sum_ms=d["delay_sum_ms"],
                   delay_min_ms=d["delay_min_ms"], delay_max_ms=d["delay_max_ms"],
                   minutes=d["minutes"], minutes_from_cms=d["minutes_from_cms"],
                   cost=d["cost"])


@dataclass
class MetricsReport:
    bucket_min: float = 10.0
    total_requests: int = 0
    rejections: int = 0
    tiers: dict[str, TierStats] = field(default_factory=lambda: {t: TierStats() for t in TIERS})
    cms_suffix_fetches: int = 0
    minutes_from_group: float = 0.0
    minutes_from_cms: float = 0.0
    tcost_total: float = 0.0
    # bucket index -> [group-sourced minutes, cms-sourced minutes]
    buckets: dict[int, list[float]] = field(default_factory=dict)
    peak_link_load: dict[str, int] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def served(self) -> int:
        return sum(s.count for s in self.tiers.values())

    @property
    def cms_accesses(self) -> int:
        return self.tiers[ServingTier.CMS_FETCH.value].count

    @property
    def vhr(self) -> float:
        if not self.total_requests:
            return 0.0
        return (self.served - self.cms_accesses) / self.total_requests

    @property
    def rejection_ratio(self) -> float:
        return self.rejections / self.total_requests if self.total_requests else 0.0

    @property
    def total_minutes(self) -> float:
        return self.minutes_from_group + self.minutes_from_cms

    @property
    def cms_block_share(self) -> float:
        total = self.total_minutes
        return self.minutes_from_cms / total if total else 0.0

    @property
    def group_block_share(self) -> float:
        total = self.total_minutes
        return self.minutes_from_group / total if total else 0.0

    @property
    def mean_delay_ms(self) -> Optional[float]:
        n = self.served
        if not n:
            return None
        return math.fsum(s.delay_sum_ms for s in self.tiers.values()) / n

    def series(self) -> list[tuple[float, float, float]]:
        if not self.buckets:
            return []
        last = max(self.buckets)
        return [(k * self.bucket_min, *self.buckets.get(k, (0.0, 0.0)))
                for k in range(last + 1)]

    def check_conservation(self):
        if self.served + self.rejections != self.total_requests:
            raise AssertionError(
                f"conservation broken: {self.served} served + {self.rejections} "
                f"rejected != {self.total_requests} requests")

    def to_dict(self) -> dict:
        self.check_conservation()
        return {
            "total_requests": self.total_requests,
            "served": self.served,
            "rejections": self.rejections,
            "rejection_ratio": self.rejection_ratio,
            "vhr": self.vhr,
            "cms_accesses": self.cms_accesses,
            "cms_suffix_fetches": self.cms_suffix_fetches,
            "minutes_from_group": self.minutes_from_group,
            "minutes_from_cms": self.minutes_from_cms,
            "cms_block_share": self.cms_block_share,
            "group_block_share": self.group_block_share,
            "tcost_total": self.tcost_total,
            "mean_delay_ms": self.mean_delay_ms,
            "tiers": {t: self.tiers[t].to_dict() for t in TIERS},
            "bucket_min": self.bucket_min,
            "series": [list(row) for row in self.series()],
            "peak_link_load": dict(sorted(self.peak_link_load.items())),
            "config": self.config,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        rep = cls(bucket_min=d["bucket_min"], total_requests=d["total_requests"],
                  rejections=d["rejections"],
                  tiers={t: TierStats.from_dict(d["tiers"][t]) for t in TIERS},
                  cms_suffix_fetches=d["cms_suffix_fetches"],
                  minutes_from_group=d["minutes_from_group"],
                  minutes_from_cms=d["minutes_from_cms"], tcost_total=d["tcost_total"],
                  peak_link_load=dict(d.get("peak_link_load", {})),
                  config=d.get("config", {}), notes=d.get("notes", {}))
        for start, lp, cms in d.get("series", []):
            k = int(round(start / rep.bucket_min))
            if lp or cms:
                rep.buckets[k] = [lp, cms]
        return rep

    def __eq__(self, other):
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def record(report: MetricsReport, outcome: SessionOutcome) -> MetricsReport:
    report.total_requests += 1
    if outcome.tier is None:
        report.rejections += 1
        return report
    st = report.tiers[outcome.tier.value]
    st.count += 1
    st.delay_sum_ms += outcome.delay_ms
    if st.delay_min_ms is None or outcome.delay_ms < st.delay_min_ms:
        st.delay_min_ms = outcome.delay_ms
    if st.delay_max_ms is None or outcome.delay_ms > st.delay_max_ms:
        st.delay_max_ms = outcome.delay_ms
    st.minutes += outcome.minutes_from_group + outcome.minutes_from_cms
    st.minutes_from_cms += outcome.minutes_from_cms
    st.cost += outcome.cost
    report.minutes_from_group += outcome.minutes_from_group
    report.minutes_from_cms += outcome.minutes_from_cms
    report.tcost_total += outcome.cost
    if outcome.suffix_fetch:
        report.cms_suffix_fetches += 1
    k = int(outcome.time_min // report.bucket_min)
    b = report.buckets.setdefault(k, [0.0, 0.0])
    b[0] += outcome.minutes_from_group
    b[1] += outcome.minutes_from_cms
    return report


# -- export -----------------------------------------------------------------

TIER_COLUMNS = ("tier", "count", "mean_delay_ms", "max_delay_ms", "minutes",
                "minutes_from_cms", "cost")


def dumps_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def tier_rows(report: MetricsReport) -> list[list]:
    rows = []
    for t in TIERS:
        s = report.tiers[t]
        rows.append([t, s.count, s.mean_delay_ms, s.delay_max_ms, s.minutes,
                     s.minutes_from_cms, s.cost])
    maxes = [s.delay_max_ms for s in report.tiers.values() if s.delay_max_ms is not None]
    rows.append(["total", report.served, report.mean_delay_ms, max(maxes, default=None),
                 math.fsum(s.minutes for s in report.tiers.values()),
                 math.fsum(s.minutes_from_cms for s in report.tiers.values()),
                 math.fsum(s.cost for s in report.tiers.values())])
    return rows


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return x


def export(report: MetricsReport, fmt: str, path) -> None:
    """Write ``report`` as ``json``, ``csv`` (tier table) or ``series`` CSV."""
    if fmt == "json":
        with open(path, "w") as fh:
            fh.write(dumps_json(report))
    elif fmt == "csv":
        report.check_conservation()
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(TIER_COLUMNS)
            for row in tier_rows(report):
                out.writerow([_cell(x) for x in row])
    elif fmt == "series":
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(("bucket_start_min", "lp_blocks", "cms_blocks"))
            for start, lp, cms in report.series():
                out.writerow((_cell(float(start)), _cell(lp), _cell(cms)))
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def load_json(path) -> MetricsReport:
    with open(path) as fh:
        return MetricsReport.from_dict(json.load(fh))


# -- comparison and aggregation ---------------------------------------------

COMPARED = ("vhr", "cms_accesses", "tcost_total", "mean_delay_ms", "cms_block_share",
            "rejection_ratio")


def compare(baseline: MetricsReport, other: MetricsReport) -> list[dict]:
    """Side-by-side values and changes of ``other`` relative to ``baseline``."""
    if baseline.total_requests != other.total_requests:
        raise ValueError(f"reports cover different trace lengths "
                         f"({baseline.total_requests} vs {other.total_requests})")
    rows = []
    for name in COMPARED:
        a, b = getattr(baseline, name), getattr(other, name)
        if a is None or b is None:
            delta = pct = None
        else:
            delta = b - a
            pct = delta / a * 100 if a else (0.0 if delta == 0 else None)
        rows.append({"metric": name, "baseline": a, "other": b, "delta": delta,
                     "pct": pct})
    return rows


def format_comparison(rows, labels=("baseline", "other")) -> str:
    def num(x):
        if x is None:
            return "-"
        if isinstance(x, int):
            return str(x)
        return f"{x:.6g}"

    lines = [f"{'metric':<18} {labels[0]:>14} {labels[1]:>14} {'delta':>14} {'change':>8}"]
    for r in rows:
        pct = "-" if r["pct"] is None else f"{r['pct']:+.0f}%"
        lines.append(f"{r['metric']:<18} {num(r['baseline']):>14} {num(r['other']):>14} "
                     f"{num(r['delta']):>14} {pct:>8}")
    return "\n".join(lines)


SUMMARY_METRICS = ("vhr", "cms_accesses", "cms_suffix_fetches", "cms_block_share",
                   "group_block_share", "tcost_total", "rejections", "rejection_ratio",
                   "mean_delay_ms", "total_requests")


def summarize(reports: list[MetricsReport]) -> dict:
    """Mean and sample standard deviation of the headline metrics."""
    out = {}
    names = list(SUMMARY_METRICS) + [f"mean_delay_ms.{t}" for t in TIERS]
    for name in names:
        if name.startswith("mean_delay_ms."):
            vals = [r.tiers[name.split(".", 1)[1]].mean_delay_ms for r in reports]
        else:
            vals = [getattr(r, name) for r in reports]
        vals = [float(v) for v in vals if v is not None]
        if not vals:
            out[name] = {"mean": None, "std": None, "n": 0}
            continue
        mean = math.fsum(vals) / len(vals)
        std = (math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
               if len(vals) > 1 else 0.0)
        out[name] = {"mean": mean, "std": std, "n": len(vals)}
    return out
