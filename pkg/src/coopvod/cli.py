"""Command-line scenario runner.

    coopvod run [CONFIG] [--seed N] [--repeat K] [--mode cooperative|single_proxy]
                [--out DIR] [--trace FILE] [--set section.key=value ...]
    coopvod compare BASELINE.json OTHER.json
    coopvod trace gen [CONFIG] --out FILE [--seed N]
    coopvod trace show FILE
    coopvod config [CONFIG]          # print the effective configuration
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import metrics
from .catalog import build_catalog
from .config import ASSUMED, ScenarioConfig, parse_config
from .engine import EngineConfig, simulate
from .errors import ConfigError
from .placement import (build_placement, build_single_proxy_placement,
                        dump_placement)
from .topology import DelayCostTable, build_topology
from .workload import Trace, generate_trace, load_trace, save_trace

log = logging.getLogger("coopvod")


def build_world(cfg: ScenarioConfig):
    catalog, popularity = build_catalog(cfg.n_videos, cfg.length_min, cfg.alpha, cfg.total_rate)
    table = DelayCostTable(delay_ms=cfg.delay_table(), cost_per_min=cfg.cost_table())
    topology = build_topology(cfg.J, cfg.M, table)
    return catalog, popularity, topology


def make_trace(cfg: ScenarioConfig, popularity, topology, seed: Optional[int] = None) -> Trace:
    return generate_trace(popularity, topology, cfg.total_rate, cfg.duration_min,
                          cfg.seed if seed is None else seed, proxy_weights=cfg.proxy_weights)


def run_scenario(cfg: ScenarioConfig, trace: Optional[Trace] = None, *, audit: bool = False):
    """Build the world described by ``cfg``, run it, and return the result.

    The report carries the effective configuration and the list of settings
    that kept their default value.
    """
    catalog, popularity, topology = build_world(cfg)
    if cfg.mode == "cooperative":
        placement = build_placement(catalog, popularity, topology, cfg.b_minutes, cfg.w_min,
                                    cfg.w_max, cfg.placement_mode, cfg.tracker_cache)
        unplaced = sum(len(d.unplaced) for d in placement.groups.values())
        util = {str(g): d.cached_minutes / (cfg.b_minutes * (cfg.M + cfg.tracker_cache))
                for g, d in placement.groups.items()}
    else:
        placement = build_single_proxy_placement(catalog, popularity, cfg.b_minutes,
                                                 cfg.w_min, cfg.w_max)
        unplaced = 0
        util = {"per_proxy": sum(placement.w.values()) / cfg.b_minutes}
    if trace is None:
        trace = make_trace(cfg, popularity, topology)
    engine_cfg = EngineConfig(b_rate=cfg.b_rate, delay_model=cfg.delay_model,
                              capacity=cfg.capacities(), bucket_min=cfg.bucket_min,
                              mode=cfg.mode, audit=audit)
    result = simulate(trace, topology, placement, catalog, engine_cfg)
    rep = result.report
    rep.config = cfg.to_sections()
    rep.notes = {
        "vhr_definition": metrics.VHR_DEFINITION,
        "block_unit": "one video minute",
        "defaulted_keys": cfg.defaulted,
        "assumed_defaults": sorted(k for k in ASSUMED if k not in cfg.explicit),
        "placement_mode": cfg.placement_mode if cfg.mode == "cooperative" else "single_proxy",
        "placement_utilization": util,
        "unplaced_prefixes": unplaced,
        "trace_seed": trace.seed,
        "audit_violations": result.audit_violations if audit else None,
    }
    return rep, placement, trace


def _write_outputs(rep, placement, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    metrics.export(rep, "json", os.path.join(out_dir, "report.json"))
    metrics.export(rep, "csv", os.path.join(out_dir, "tiers.csv"))
    metrics.export(rep, "series", os.path.join(out_dir, "series.csv"))
    if hasattr(placement, "groups"):
        dump_placement(placement, os.path.join(out_dir, "placement.csv"))


def _one_seed(args):
    cfg, seed, trace_path = args
    cfg = cfg.replace(seed=seed)
    trace = load_trace(trace_path) if trace_path else None
    return run_scenario(cfg, trace)


def _headline(rep) -> str:
    return (f"requests={rep.total_requests} vhr={rep.vhr:.4f} cms_accesses={rep.cms_accesses} "
            f"cms_block_share={rep.cms_block_share:.4f} tcost={rep.tcost_total:.1f} "
            f"rejected={rep.rejections}")


def cmd_run(ns) -> int:
    overrides = _overrides(ns)
    cfg = parse_config(ns.config, overrides)
    if ns.trace and ns.repeat > 1:
        raise ConfigError("--repeat needs generated traces; drop --trace", key="repeat")
    seeds = [cfg.seed + i for i in range(ns.repeat)]
    jobs = [(cfg, s, ns.trace) for s in seeds]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_one_seed, jobs))
    else:
        results = [_one_seed(j) for j in jobs]

    if ns.repeat == 1:
        rep, placement, _ = results[0]
        _write_outputs(rep, placement, ns.out)
        print(_headline(rep))
        return 0
    reports = []
    for seed, (rep, placement, _) in zip(seeds, results):
        _write_outputs(rep, placement, os.path.join(ns.out, f"seed_{seed}"))
        print(f"seed {seed}: {_headline(rep)}")
        reports.append(rep)
    summary = {"seeds": seeds, "config": cfg.to_sections(), "metrics": metrics.summarize(reports)}
    with open(os.path.join(ns.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, stats in summary["metrics"].items():
        if stats["n"]:
            print(f"{name:<34} mean={stats['mean']:.6g} std={stats['std']:.3g}")
    return 0


def cmd_compare(ns) -> int:
    a = metrics.load_json(ns.baseline)
    b = metrics.load_json(ns.other)
    rows = metrics.compare(a, b)
    print(metrics.format_comparison(rows, labels=(os.path.basename(ns.baseline),
                                                  os.path.basename(ns.other))))
    if ns.json:
        with open(ns.json, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_trace_gen(ns) -> int:
    cfg = parse_config(ns.config, _overrides(ns))
    _, popularity, topology = build_world(cfg)
    trace = make_trace(cfg, popularity, topology)
    save_trace(trace, ns.out)
    print(f"wrote {len(trace)} requests to {ns.out}")
    return 0


def cmd_trace_show(ns) -> int:
    trace = load_trace(ns.file)
    print(f"seed: {trace.seed}")
    for k in sorted(trace.params):
        print(f"{k}: {trace.params[k]}")
    print(f"requests: {len(trace)}")
    if trace.requests:
        print(f"first arrival: {trace.requests[0].arrival_time_min:.6g} min")
        print(f"last arrival: {trace.requests[-1].arrival_time_min:.6g} min")
        counts = {}
        for r in trace.requests:
            counts[r.video_id] = counts.get(r.video_id, 0) + 1
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:ns.top]
        print("most requested videos: " + ", ".join(f"{v}:{n}" for v, n in top))
    return 0


def cmd_config(ns) -> int:
    print(parse_config(ns.config, _overrides(ns)).to_ini(), end="")
    return 0


def _overrides(ns) -> dict:
    out = {}
    for item in getattr(ns, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}", key=item)
        out[key.strip()] = value.strip()
    for flag in ("seed", "mode"):
        value = getattr(ns, flag, None)
        if value is not None:
            out[flag] = str(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopvod",
                                     description="Cooperative proxy VoD simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("config", nargs="?", default=None, help="scenario file (INI)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one setting; may repeat")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("run", help="run a scenario")
    common(p)
    p.add_argument("--repeat", type=int, default=1, help="average over K consecutive seeds")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes for --repeat")
    p.add_argument("--mode", choices=("cooperative", "single_proxy"), default=None)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trace", default=None, help="replay a saved trace instead of generating")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare two JSON reports")
    p.add_argument("baseline")
    p.add_argument("other")
    p.add_argument("--json", default=None, help="also write the delta table as JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace", help="generate or inspect request traces")
    tsub = p.add_subparsers(dest="trace_command", required=True)
    g = tsub.add_parser("gen")
    common(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_trace_gen)
    s = tsub.add_parser("show")
    s.add_argument("file")
    s.add_argument("--top", type=int, default=10)
    s.set_defaults(func=cmd_trace_show)

    p = sub.add_parser("config", help="print the effective configuration")
    common(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(ns, "repeat", 1) < 1:
        print("error: --repeat must be >= 1", file=sys.stderr)
        return 2
    try:
        return ns.func(ns)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
