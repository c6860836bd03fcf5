"""Deterministic trace-driven simulator of a hybrid SLC/TLC 3D SSD comparing
SLC-cache management schemes: a Turbo-Write style baseline, in-place
switching of cache layers by reprogramming, its advanced-GC assisted variant,
and the cooperative design pairing it with a traditional whole-block cache."""

from .engine import Engine, run, service_latency
from .flash import (
    CapacityMode,
    GeometryConfig,
    PhysAddr,
    Role,
    TimingConfig,
    WLMode,
    capacity_of,
)
from .ftl import ActionKind, Device, GcDest, WriteAction
from .metrics import (
    RunReport,
    SummaryRow,
    bandwidth_series,
    breakdown,
    latency_stats,
    normalize,
    report_digest,
    write_amplification,
)
from .policy import Scheme, SchemeKind, default_scheme, route_write
from .workload import (
    OpKind,
    PageOp,
    Request,
    Trace,
    daily_epilogue,
    gen_periodic,
    gen_sequential,
    load_msr_trace,
    parse_msr_line,
    split_request,
    to_bursty,
)

__version__ = "0.1.0"
