"""Scenario configuration: INI-style ``key = value`` sections with defaults.

Every key has a default; a config file (or ``--set section.key=value``
overrides) only needs to name what differs.  ``to_sections`` echoes the
effective values so a report can be fed back in to rerun its scenario.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError
from .topology import DEFAULT_COST_PER_MIN, DEFAULT_DELAY_MS, LinkKind

UNLIMITED_WORDS = ("unlimited", "inf", "none")


def _pos_int(key, raw):
    v = _int(key, raw)
    if v < 1:
        raise ConfigError(f"{key} must be >= 1, got {v}", key=key)
    return v


def _int(key, raw):
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {raw!r}", key=key) from None


def _float(key, raw):
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {raw!r}", key=key) from None
    if math.isnan(v) or math.isinf(v):
        raise ConfigError(f"{key} must be finite, got {raw!r}", key=key)
    return v


def _pos_float(key, raw):
    v = _float(key, raw)
    if not v > 0:
        raise ConfigError(f"{key} must be > 0, got {v}", key=key)
    return v


def _nonneg_float(key, raw):
    v = _float(key, raw)
    if v < 0:
        raise ConfigError(f"{key} must be >= 0, got {v}", key=key)
    return v


def _bool(key, raw):
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {raw!r}", key=key)


def _capacity(key, raw):
    if raw is None or str(raw).strip().lower() in UNLIMITED_WORDS + ("",):
        return None
    v = _int(key, raw)
    if v < 0:
        raise ConfigError(f"{key} must be >= 0 or 'unlimited', got {v}", key=key)
    return v


def _lengths(key, raw):
    if isinstance(raw, (int, float)):
        return _pos_float(key, raw)
    if isinstance(raw, (list, tuple)):
        return tuple(_pos_float(key, x) for x in raw)
    parts = [p for p in str(raw).replace(";", ",").split(",") if p.strip()]
    if len(parts) == 1:
        return _pos_float(key, parts[0])
    return tuple(_pos_float(key, p) for p in parts)


def _weights(key, raw):
    if raw is None or raw == "" or raw == ():
        return None
    if isinstance(raw, (list, tuple)):
        vals = [_nonneg_float(key, x) for x in raw]
    else:
        vals = [_nonneg_float(key, p) for p in str(raw).replace(";", ",").split(",")
                if p.strip()]
    return tuple(vals) if vals else None


def _choice(*options):
    def check(key, raw):
        s = str(raw).strip()
        if s not in options:
            raise ConfigError(f"{key} must be one of {', '.join(options)}, got {s!r}", key=key)
        return s
    return check


def _seed(key, raw):
    v = _int(key, raw)
    if v < 0:
        raise ConfigError(f"{key} must be >= 0, got {v}", key=key)
    return v


# key -> (section, parser); the dataclass field of the same name holds the value
SCHEMA = {
    "n_videos": ("catalog", _pos_int),
    "length_min": ("catalog", _lengths),
    "alpha": ("catalog", _nonneg_float),
    "total_rate": ("catalog", _pos_float),
    "J": ("topology", _pos_int),
    "M": ("topology", _pos_int),
}
for _k in LinkKind:
    SCHEMA[f"delay_{_k.value}"] = ("topology", _nonneg_float)
for _k in LinkKind:
    SCHEMA[f"cost_{_k.value}"] = ("topology", _nonneg_float)
for _k in LinkKind:
    SCHEMA[f"capacity_{_k.value}"] = ("topology", _capacity)
SCHEMA.update({
    "b_minutes": ("placement", _pos_float),
    "w_min": ("placement", _pos_float),
    "w_max": ("placement", _pos_float),
    "placement_mode": ("placement", _choice("partitioned", "replicated", "disjoint")),
    "tracker_cache": ("placement", _bool),
    "b_rate": ("engine", _pos_float),
    "delay_model": ("engine", _choice("pipelined", "literal")),
    "bucket_min": ("engine", _pos_float),
    "duration_min": ("workload", _nonneg_float),
    "seed": ("workload", _seed),
    "proxy_weights": ("workload", _weights),
    "mode": ("run", _choice("cooperative", "single_proxy")),
})

SECTIONS = ("catalog", "topology", "placement", "engine", "workload", "run")

# defaults that are modelling assumptions rather than published parameters
ASSUMED = ("n_videos", "length_min", "total_rate", "b_minutes", "b_rate", "duration_min",
           "bucket_min") + tuple(f"capacity_{k.value}" for k in LinkKind) \
    + tuple(f"cost_{k.value}" for k in LinkKind)


@dataclass
class ScenarioConfig:
    n_videos: int = 3000
    length_min: object = 35.0
    alpha: float = 0.986
    total_rate: float = 60.0
    J: int = 6
    M: int = 6
    delay_proxy_client: float = DEFAULT_DELAY_MS[LinkKind.PROXY_CLIENT]
    delay_proxy_proxy: float = DEFAULT_DELAY_MS[LinkKind.PROXY_PROXY]
    delay_tracker_proxy: float = DEFAULT_DELAY_MS[LinkKind.TRACKER_PROXY]
    delay_tracker_tracker: float = DEFAULT_DELAY_MS[LinkKind.TRACKER_TRACKER]
    delay_cms_proxy: float = DEFAULT_DELAY_MS[LinkKind.CMS_PROXY]
    cost_proxy_client: float = DEFAULT_COST_PER_MIN[LinkKind.PROXY_CLIENT]
    cost_proxy_proxy: float = DEFAULT_COST_PER_MIN[LinkKind.PROXY_PROXY]
    cost_tracker_proxy: float = DEFAULT_COST_PER_MIN[LinkKind.TRACKER_PROXY]
    cost_tracker_tracker: float = DEFAULT_COST_PER_MIN[LinkKind.TRACKER_TRACKER]
    cost_cms_proxy: float = DEFAULT_COST_PER_MIN[LinkKind.CMS_PROXY]
    capacity_proxy_client: Optional[int] = 512
    capacity_proxy_proxy: Optional[int] = 512
    capacity_tracker_proxy: Optional[int] = 512
    capacity_tracker_tracker: Optional[int] = 512
    capacity_cms_proxy: Optional[int] = 512
    b_minutes: float = 300.0
    w_min: float = 25.0
    w_max: float = 60.0
    placement_mode: str = "partitioned"
    tracker_cache: bool = False
    b_rate: float = 2.0
    delay_model: str = "pipelined"
    bucket_min: float = 10.0
    duration_min: float = 1000.0
    seed: int = 1
    proxy_weights: Optional[tuple] = None
    mode: str = "cooperative"
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self):
        if self.w_min > self.w_max:
            raise ConfigError(f"w_min ({self.w_min}) exceeds w_max ({self.w_max})", key="w_min")
        if isinstance(self.length_min, tuple) and len(self.length_min) != self.n_videos:
            raise ConfigError(f"length_min lists {len(self.length_min)} lengths for "
                              f"{self.n_videos} videos", key="length_min")
        if self.proxy_weights is not None and len(self.proxy_weights) != self.J * self.M:
            raise ConfigError(f"proxy_weights needs {self.J * self.M} entries",
                              key="proxy_weights")

    def delay_table(self) -> dict:
        return {k: getattr(self, f"delay_{k.value}") for k in LinkKind}

    def cost_table(self) -> dict:
        return {k: getattr(self, f"cost_{k.value}") for k in LinkKind}

    def capacities(self) -> dict:
        return {k: getattr(self, f"capacity_{k.value}") for k in LinkKind}

    def replace(self, **changes) -> "ScenarioConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, raw in changes.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", key=key)
            values[key] = SCHEMA[key][1](key, raw)
        values["explicit"] = self.explicit | frozenset(changes)
        return ScenarioConfig(**values)

    def to_sections(self) -> dict:
        out = {s: {} for s in SECTIONS}
        for key, (section, _) in SCHEMA.items():
            value = getattr(self, key)
            if value is None and key.startswith("capacity_"):
                out[section][key] = "unlimited"
            else:
                out[section][key] = _render(value)
        return out

    def to_ini(self) -> str:
        lines = []
        for section, items in self.to_sections().items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in items.items())
            lines.append("")
        return "\n".join(lines)

    @property
    def defaulted(self) -> list[str]:
        return sorted(k for k in SCHEMA if k not in self.explicit)


def _render(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_render(x) for x in v)
    return str(v)


def from_sections(sections: dict, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Build a config from ``{section: {key: value}}``; unknown names are errors."""
    changes = {}
    for section, items in sections.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, raw in items.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
            if SCHEMA[key][0] != section:
                raise ConfigError(f"key {key!r} belongs in [{SCHEMA[key][0]}], "
                                  f"not [{section}]", key=key)
            if raw == "" and key not in ("proxy_weights",) and not key.startswith("capacity_"):
                raise ConfigError(f"{key} has no value", key=key)
            changes[key] = raw
    return (base or ScenarioConfig()).replace(**changes)


def parse_config(path=None, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Read ``path`` (if given), then apply ``overrides``.

    ``overrides`` maps plain keys (``"J"``) or dotted ``"section.key"`` names
    to raw string values; they win over the file.
    """
    sections = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
    cfg = from_sections(sections)
    if overrides:
        flat = {}
        for name, raw in overrides.items():
            key = name.split(".", 1)[1] if "." in name else name
            section = name.split(".", 1)[0] if "." in name else None
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", key=key)
            if section is not None and SCHEMA[key][0] != section:
                raise ConfigError(f"key {key!r} belongs in [{SCHEMA[key][0]}]", key=key)
            flat[key] = raw
        cfg = cfg.replace(**flat)
    return cfg
