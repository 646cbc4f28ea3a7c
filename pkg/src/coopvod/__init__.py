"""Discrete-event simulator of cooperative proxy-server video-on-demand caching."""
from .catalog import Catalog, PopularityModel, Video, build_catalog, zipf_weights
from .config import ScenarioConfig, parse_config
from .engine import EngineConfig, classify, run, simulate, startup_delay_ms
from .errors import ConfigError
from .metrics import MetricsReport, compare
from .placement import (Directory, allocate_prefixes, assign_to_proxies, build_placement,
                        build_single_proxy_placement, lookup)
from .topology import (LinkKind, ServingTier, Topology, build_topology, is_ring_neighbor,
                       ring_distance)
from .workload import Request, Trace, generate_trace, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "Catalog", "PopularityModel", "Video", "build_catalog", "zipf_weights",
    "ScenarioConfig", "parse_config",
    "EngineConfig", "classify", "run", "simulate", "startup_delay_ms",
    "ConfigError", "MetricsReport", "compare",
    "Directory", "allocate_prefixes", "assign_to_proxies", "build_placement",
    "build_single_proxy_placement", "lookup",
    "LinkKind", "ServingTier", "Topology", "build_topology", "is_ring_neighbor",
    "ring_distance",
    "Request", "Trace", "generate_trace", "load_trace", "save_trace",
]
