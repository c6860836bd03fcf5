"""Experiment configuration: geometry/timing presets, JSON config files,
workload source specs, and pre-run validation."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .flash import GeometryConfig, TimingConfig
from .policy import Scheme, SchemeKind, default_scheme
from .workload import (
    Trace,
    daily_epilogue,
    gen_periodic,
    gen_sequential,
    load_msr_trace,
    to_bursty,
)

KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB

# Full-scale device: 384GB over 128 planes, two word lines per layer and 64
# layers so the two-layer SLC allocation over every block is exactly 4GB.
FULL_GEOMETRY = GeometryConfig()

# Scaled-down preset so the reproduction suites finish in seconds: 4 planes,
# 64 blocks/plane, 72 TLC pages/block -> 72MB device, 4MB two-layer cache.
DESK_GEOMETRY = GeometryConfig(
    channels=2, chips_per_channel=1, dies_per_chip=1, planes_per_die=2,
    blocks_per_plane=64, wordlines_per_layer=2, layers_per_block=12,
    page_size=4096,
)

GEOMETRY_PRESETS = {"full": FULL_GEOMETRY, "desk": DESK_GEOMETRY}

_SIZE_SUFFIXES = [
    ("GIB", GIB), ("MIB", MIB), ("KIB", KIB),
    ("GB", 10 ** 9), ("MB", 10 ** 6), ("KB", 10 ** 3),
    ("G", GIB), ("M", MIB), ("K", KIB), ("B", 1),
]


def parse_size(text: str) -> int:
    s = str(text).strip().upper()
    for suffix, mult in _SIZE_SUFFIXES:
        if s.endswith(suffix):
            num = s[: -len(suffix)].strip()
            return int(float(num) * mult)
    return int(s)


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=lambda: DESK_GEOMETRY)
    timing: TimingConfig = field(default_factory=TimingConfig)
    scheme_kind: SchemeKind = SchemeKind.BASELINE
    slc_quota_pages: Optional[int] = None
    trad_quota_pages: Optional[int] = None
    donor_fraction: Optional[float] = None
    trace_path: Optional[str] = None
    trace_disk: Optional[int] = None
    gen_spec: Optional[str] = None
    mode: str = "daily"               # bursty | daily
    seed: int = 0
    out_dir: str = "out"
    window_ms: float = 100.0
    idle_threshold_ms: float = 100.0
    tlc_per_page: bool = False
    gc_low_watermark: float = 0.05

    def scheme(self) -> Scheme:
        return default_scheme(self.scheme_kind, self.geometry,
                              self.slc_quota_pages, self.trad_quota_pages,
                              self.donor_fraction)

    def validate(self):
        if self.mode not in ("bursty", "daily"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.trace_path is None and self.gen_spec is None:
            raise ConfigError("config needs a trace path or a generator spec")
        if self.trace_path is not None and not os.path.exists(self.trace_path):
            raise ConfigError(f"trace file not found: {self.trace_path}")
        self.scheme().validate(self.geometry)

    def build_trace(self) -> Trace:
        if self.trace_path is not None:
            trace = load_msr_trace(self.trace_path, self.trace_disk)
        else:
            trace = build_generated_trace(self.gen_spec)
        if self.mode == "bursty":
            return to_bursty(trace)
        return daily_epilogue(trace)

    def run_kwargs(self) -> dict:
        return {
            "idle_threshold_ms": self.idle_threshold_ms,
            "tlc_per_page": self.tlc_per_page,
            "gc_low_watermark": self.gc_low_watermark,
        }

    def snapshot(self) -> dict:
        return {
            "geometry": dataclasses.asdict(self.geometry),
            "scheme": self.scheme_kind.value,
            "mode": self.mode,
            "seed": self.seed,
            "gen": self.gen_spec,
            "trace": self.trace_path,
            "tlc_per_page": self.tlc_per_page,
        }


def build_generated_trace(spec: str) -> Trace:
    """Generator specs:

    ``seq:<total>:<io>[:<gap_ms>]``             sequential writes
    ``periodic:<streams>:<bytes>:<gap_ms>[:<io>]``  daily-style streams
    """
    parts = str(spec).split(":")
    if not parts:
        raise ConfigError("empty generator spec")
    head, args = parts[0], parts[1:]
    try:
        if head == "seq":
            total = parse_size(args[0])
            io = parse_size(args[1])
            gap = float(args[2]) if len(args) > 2 else 0.0
            return gen_sequential(total, io, gap)
        if head == "periodic":
            streams = int(args[0])
            per_stream = parse_size(args[1])
            gap = float(args[2])
            io = parse_size(args[3]) if len(args) > 3 else 32 * KIB
            return gen_periodic(streams, per_stream, gap, io)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad generator spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown generator {head!r}")


def geometry_from_dict(data: dict) -> GeometryConfig:
    if "preset" in data:
        preset = data["preset"]
        if preset not in GEOMETRY_PRESETS:
            raise ConfigError(f"unknown geometry preset {preset!r}")
        return GEOMETRY_PRESETS[preset]
    return GeometryConfig(**data)


def timing_from_dict(data: dict) -> TimingConfig:
    return TimingConfig(**data)


def load_config_file(path: str) -> ExperimentConfig:
    """JSON config; every field optional, flags may override afterwards."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = ExperimentConfig()
    if "geometry" in data:
        cfg.geometry = geometry_from_dict(data["geometry"])
    if "timing" in data:
        cfg.timing = timing_from_dict(data["timing"])
    if "scheme" in data:
        scheme = data["scheme"]
        if isinstance(scheme, str):
            cfg.scheme_kind = SchemeKind(scheme)
        else:
            cfg.scheme_kind = SchemeKind(scheme["kind"])
            cfg.slc_quota_pages = scheme.get("slc_quota_pages")
            cfg.trad_quota_pages = scheme.get("trad_quota_pages")
            cfg.donor_fraction = scheme.get("donor_fraction")
    workload = data.get("workload", {})
    cfg.trace_path = workload.get("trace")
    cfg.trace_disk = workload.get("disk")
    cfg.gen_spec = workload.get("gen")
    for key in ("mode", "seed", "out_dir", "window_ms", "idle_threshold_ms",
                "tlc_per_page", "gc_low_watermark"):
        if key in data:
            setattr(cfg, key, data[key])
    return cfg
