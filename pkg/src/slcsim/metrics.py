"""Run reports and everything derived from them: write amplification, writes
breakdown, latency statistics, bandwidth series, cross-run normalization."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from .errors import EmptyRun, MissingBaseline
from .ftl import CAT_ERASE, CAT_PAD, DATA_CATEGORIES, HOST_CATEGORIES


class Event(NamedTuple):
    time_us: int
    plane: int
    kind: str
    category: str
    latency_us: int
    lpn: Optional[int]
    src: Optional[tuple]
    dst: Optional[tuple]


@dataclass
class RunReport:
    scheme: str
    seed: int
    config: Dict = field(default_factory=dict)
    events: List[Event] = field(default_factory=list)
    counters: Dict[str, int] = field(default_factory=dict)
    host_page_writes: int = 0
    # (arrival_us, completion_us) per completed host page write
    write_completions: List[Tuple[int, int]] = field(default_factory=list)
    erase_histogram: Dict[Tuple[int, int], int] = field(default_factory=dict)
    sync_gc_count: int = 0
    skipped_lines: int = 0
    device_full: bool = False
    end_time_us: int = 0
    page_size: int = 4096

    def add_event(self, ev: Event):
        self.events.append(ev)
        self.counters[ev.category] = self.counters.get(ev.category, 0) + 1

    def data_program_count(self) -> int:
        return sum(self.counters.get(c, 0) for c in DATA_CATEGORIES)

    def erase_count_total(self) -> int:
        return self.counters.get(CAT_ERASE, 0)


def write_amplification(report: RunReport) -> Optional[float]:
    """Data-carrying physical page programs divided by host page writes.

    Padding slots carry no data and are excluded (reported separately).
    """
    if report.host_page_writes == 0:
        return None
    return report.data_program_count() / report.host_page_writes


def breakdown(report: RunReport) -> Dict[str, float]:
    """Fraction of data-carrying programs per category (only nonzero ones)."""
    if report.host_page_writes == 0:
        raise EmptyRun("breakdown undefined without host writes")
    total = report.data_program_count()
    return {
        c: report.counters.get(c, 0) / total
        for c in DATA_CATEGORIES
        if report.counters.get(c, 0)
    }


def bandwidth_series(report: RunReport, window_ms: float) -> List[Tuple[float, float]]:
    """(window start ms, MB/s) of completed host-write bytes per window."""
    if window_ms <= 0:
        raise ValueError("window_ms must be > 0")
    if not report.write_completions:
        return []
    window_us = int(round(window_ms * 1000))
    last = max(c for _, c in report.write_completions)
    n_windows = last // window_us + 1
    bytes_per_window = [0] * n_windows
    for _, completion in report.write_completions:
        bytes_per_window[completion // window_us] += report.page_size
    # bytes / (window seconds) / 1e6 simplifies to bytes / (window_ms * 1000)
    return [
        (i * window_ms, b / (window_ms * 1000.0))
        for i, b in enumerate(bytes_per_window)
    ]


def latency_stats(report: RunReport) -> Dict[str, float]:
    """Mean and nearest-rank percentiles (ms) over host write completions."""
    lats = sorted(c - a for a, c in report.write_completions)
    if not lats:
        raise EmptyRun("no completed host writes")

    def rank(q: float) -> float:
        idx = min(len(lats) - 1, max(0, math.ceil(q * len(lats)) - 1))
        return lats[idx] / 1000.0

    return {
        "mean": sum(lats) / len(lats) / 1000.0,
        "p50": rank(0.50),
        "p95": rank(0.95),
        "p99": rank(0.99),
        "max": lats[-1] / 1000.0,
    }


@dataclass
class SummaryRow:
    scheme: str
    avg_write_latency_ms: float
    p99_latency_ms: float
    write_amplification: Optional[float]
    breakdown: Dict[str, float]
    total_runtime_ms: float

    @classmethod
    def from_report(cls, report: RunReport) -> "SummaryRow":
        stats = latency_stats(report) if report.write_completions else \
            {"mean": 0.0, "p99": 0.0}
        return cls(
            scheme=report.scheme,
            avg_write_latency_ms=stats["mean"],
            p99_latency_ms=stats["p99"],
            write_amplification=write_amplification(report),
            breakdown=breakdown(report) if report.host_page_writes else {},
            total_runtime_ms=report.end_time_us / 1000.0,
        )


def normalize(rows: List[SummaryRow], baseline_scheme: str = "baseline") -> Dict[str, Dict[str, float]]:
    """Per-scheme metrics divided by the baseline row's metrics."""
    base = next((r for r in rows if r.scheme == baseline_scheme), None)
    if base is None:
        raise MissingBaseline(f"no row for scheme {baseline_scheme!r}")
    out: Dict[str, Dict[str, float]] = {}
    for row in rows:
        out[row.scheme] = {
            "latency": _ratio(row.avg_write_latency_ms, base.avg_write_latency_ms),
            "p99": _ratio(row.p99_latency_ms, base.p99_latency_ms),
            "wa": _ratio(row.write_amplification, base.write_amplification),
        }
    return out


def _ratio(value, base) -> float:
    if value is None or base in (None, 0):
        return float("nan")
    return value / base


def report_digest(report: RunReport) -> str:
    """Stable hash of the full event log plus counters, for determinism checks."""
    h = hashlib.sha256()
    for ev in report.events:
        h.update(repr(ev).encode())
    h.update(repr(sorted(report.counters.items())).encode())
    h.update(repr(report.host_page_writes).encode())
    h.update(repr(report.write_completions).encode())
    return h.hexdigest()


def events_csv_lines(report: RunReport):
    """Event log rows in the documented column order."""
    yield "time_ms,plane,category,latency_ms"
    for ev in report.events:
        yield f"{ev.time_us / 1000.0},{ev.plane},{ev.category},{ev.latency_us / 1000.0}"


def summary_kv_lines(report: RunReport):
    row = SummaryRow.from_report(report)
    wa = write_amplification(report)
    yield f"scheme={report.scheme}"
    yield f"seed={report.seed}"
    yield f"host_page_writes={report.host_page_writes}"
    for cat in sorted(report.counters):
        yield f"count.{cat}={report.counters[cat]}"
    yield f"write_amplification={'' if wa is None else repr(wa)}"
    yield f"avg_write_latency_ms={row.avg_write_latency_ms!r}"
    yield f"p99_latency_ms={row.p99_latency_ms!r}"
    yield f"total_runtime_ms={row.total_runtime_ms!r}"
    yield f"sync_gc_count={report.sync_gc_count}"
    yield f"skipped_lines={report.skipped_lines}"
    yield f"device_full={report.device_full}"
    yield f"digest={report_digest(report)}"
