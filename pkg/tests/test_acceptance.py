"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line with the measured values, straight
to the terminal.  Run just this module with::

    pytest tests/test_acceptance.py -v
"""
import itertools
import math
import random
import time

import pytest

from coopvod.catalog import build_catalog, zipf_weights
from coopvod.cli import build_world, make_trace, run_scenario
from coopvod.config import ScenarioConfig
from coopvod.engine import classify
from coopvod.errors import ConfigError
from coopvod.metrics import dumps_json
from coopvod.placement import Directory, GroupDirectory, build_placement, group_video_sets
from coopvod.topology import ServingTier, build_topology, proxy
from coopvod.workload import Request

from oracles import brute_force_tier


@pytest.fixture
def report_line(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


@pytest.fixture(scope="module")
def default_pair():
    """Cooperative and single-proxy runs of the default scenario on one trace."""
    cfg = ScenarioConfig()
    _, pop, topo = build_world(cfg)
    trace = make_trace(cfg, pop, topo)
    coop, _, _ = run_scenario(cfg, trace, audit=True)
    sps, _, _ = run_scenario(cfg.replace(mode="single_proxy"), trace, audit=True)
    return coop, sps, len(trace)


def test_zipf_correctness(report_line):
    start = time.perf_counter()
    worst, bad = 0.0, []
    for n, alpha in itertools.product((1, 2, 10, 1000), (0.0, 0.986, 1.0)):
        p = zipf_weights(n, alpha)
        raw = [1.0 / i ** alpha for i in range(1, n + 1)]
        oracle = [r / sum(raw) for r in raw]
        err = max(abs(a - b) for a, b in zip(p, oracle))
        worst = max(worst, err, abs(math.fsum(p) - 1.0))
        if alpha > 0 and any(a <= b for a, b in zip(p, p[1:])):
            bad.append((n, alpha))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and not bad and elapsed < 1.0
    report_line("zipf", ok, f"max error {worst:.1e}, non-decreasing cases {bad}, "
                            f"{elapsed * 1000:.1f} ms")


def test_classification_matches_oracle(report_line):
    j, m, n = 3, 3, 10
    topo = build_topology(j, m)
    rng = random.Random(2024)
    start = time.perf_counter()
    instances = mismatches = 0
    while instances < 10_000:
        holders = {vid: {} for vid in range(1, n + 1)}
        groups = {g: GroupDirectory(group=g, n_videos=n) for g in range(1, j + 1)}
        density = rng.random()
        for g, vid in itertools.product(range(1, j + 1), range(1, n + 1)):
            if rng.random() < density:
                q = rng.randint(1, m)
                groups[g].add(q, vid, 30.0)
                holders[vid][g] = q
        directory = Directory(groups, {}, mode="random")
        for _ in range(20):
            g, q, vid = rng.randint(1, j), rng.randint(1, m), rng.randint(1, n)
            tier, node, _ = classify(Request(0.0, g, q, vid), directory, topo)
            want, h, r = brute_force_tier(holders[vid], j, m, g, q)
            if tier is not want or (h is not None and node != proxy(h, r)):
                mismatches += 1
            instances += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    report_line("classification", ok, f"{instances} instances, {mismatches} mismatches, "
                                      f"{elapsed:.2f} s")


def test_conservation_and_capacity(report_line, default_pair):
    coop, sps, n = default_pair
    runs = [("default cooperative", coop), ("default single_proxy", sps)]
    for cap in ("0", "3", "40"):
        cfg = ScenarioConfig().replace(duration_min=60, **{f"capacity_{k}": cap for k in
                                       ("proxy_client", "proxy_proxy", "tracker_proxy",
                                        "tracker_tracker", "cms_proxy")})
        rep, _, _ = run_scenario(cfg, audit=True)
        runs.append((f"capacity {cap}", rep))
    problems = []
    for name, rep in runs:
        counted = sum(t.count for t in rep.tiers.values()) + rep.rejections
        if counted != rep.total_requests:
            problems.append(f"{name}: {counted} != {rep.total_requests}")
        if rep.notes["audit_violations"]:
            problems.append(f"{name}: {rep.notes['audit_violations']} audit violations")
    tight = runs[3][1]
    detail = (f"{len(runs)} runs, problems {problems or 'none'}; "
              f"C=3 run rejected {tight.rejections}/{tight.total_requests}")
    report_line("conservation", not problems, detail)


def _random_placement_config(rng):
    while True:
        n = rng.randint(200, 3000)
        lengths = [rng.uniform(20, 120) for _ in range(n)] if rng.random() < 0.5 \
            else rng.choice([30.0, 35.0, 60.0, 90.0])
        w_min = rng.uniform(5, 30)
        w_max = rng.uniform(w_min, 90)
        j, m = rng.randint(1, 6), rng.randint(1, 8)
        b = rng.uniform(max(w_min, 30), 1000)
        mode = rng.choice(["partitioned", "replicated", "disjoint"])
        alpha = rng.choice([0.0, 0.5, 0.986, 1.0, 1.3])
        catalog, pop = build_catalog(n, lengths, alpha)
        sets = group_video_sets(n, j, mode)
        plentiful = all(math.fsum(min(catalog.length(v), w_max, b) for v in vids)
                        >= m * b + 2 * w_max for vids in sets)
        if plentiful:
            return catalog, pop, build_topology(j, m), b, w_min, w_max, mode


def test_placement_constraints(report_line):
    rng = random.Random(7)
    violations = []
    worst_gap = 0.0
    for trial in range(100):
        catalog, pop, topo, b, w_min, w_max, mode = _random_placement_config(rng)
        m = topo.m_proxies
        try:
            placement = build_placement(catalog, pop, topo, b, w_min, w_max, mode)
        except ConfigError as exc:
            violations.append(f"#{trial}: {exc}")
            continue
        for g, d in placement.groups.items():
            loads = [d.load(q) for q in range(1, m + 1)]
            cached = d.cached_minutes
            worst_gap = max(worst_gap, m * b - cached)
            placed = [v for vids in d.by_proxy.values() for v in vids]
            if max(loads) > b + 1e-6:
                violations.append(f"#{trial} g{g}: load {max(loads):.3f} > B={b:.3f}")
            if cached > m * b + 1e-6 or cached < m * b - m:
                violations.append(f"#{trial} g{g}: cached {cached:.3f} vs M*B={m * b:.3f}")
            if len(placed) != len(set(placed)) or d.unplaced:
                violations.append(f"#{trial} g{g}: duplicate or unplaced prefixes")
    ok = not violations
    report_line("placement", ok, f"100 configs, {len(violations)} violations "
                                 f"{violations[:3]}, largest shortfall {worst_gap:.3f} min")


def test_tier_delay_ordering(report_line, default_pair):
    coop, _, _ = default_pair
    order = [t.value for t in ServingTier]
    means = [coop.tiers[t].mean_delay_ms for t in order]
    counts = [coop.tiers[t].count for t in order]
    ok = (min(counts) >= 100 and means[0] < means[1] <= means[2] < means[3] < means[4])
    detail = ", ".join(f"{t}={m_:.0f}ms (n={c})" for t, m_, c in zip(order, means, counts))
    report_line("tier ordering", ok, detail)


def test_cooperative_beats_single_proxy(report_line, default_pair):
    coop, sps, n = default_pair
    reduction = 1 - coop.cms_accesses / sps.cms_accesses
    ok = (n >= 55_000 and coop.vhr > sps.vhr and 0.20 <= reduction <= 0.60
          and coop.tcost_total < sps.tcost_total)
    report_line("cooperative vs single proxy", ok,
                f"{n} requests, vhr {coop.vhr:.4f} vs {sps.vhr:.4f}, cms accesses "
                f"{coop.cms_accesses} vs {sps.cms_accesses} (-{reduction:.1%}), tcost "
                f"{coop.tcost_total:.4g} vs {sps.tcost_total:.4g}")


def test_block_share_band(report_line, default_pair):
    coop, _, _ = default_pair
    cms, group = coop.cms_block_share, coop.group_block_share
    ok = 0.20 <= cms <= 0.50 and 0.50 <= group <= 0.80
    report_line("block share", ok, f"cms {cms:.4f} in [0.20, 0.50], group {group:.4f} "
                                   f"in [0.50, 0.80]")


def test_determinism_and_speed(report_line):
    cfg = ScenarioConfig()
    first = dumps_json(run_scenario(cfg)[0])
    second = dumps_json(run_scenario(cfg)[0])
    big = cfg.replace(duration_min=100_000 / cfg.total_rate)
    start = time.perf_counter()
    rep, _, _ = run_scenario(big)
    elapsed = time.perf_counter() - start
    ok = first == second and rep.total_requests >= 95_000 and elapsed < 10.0
    report_line("determinism and speed", ok,
                f"identical reports {first == second}, {rep.total_requests} requests "
                f"in {elapsed:.2f} s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
