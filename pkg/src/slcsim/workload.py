"""Trace ingestion and synthesis: MSR-format parsing, request splitting,
bursty/daily transforms, and deterministic generators."""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional

from .errors import ConfigError, MalformedLine


class OpKind(Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class Request:
    arrival_ms: float
    op: OpKind
    offset: int
    size: int

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigError("request size must be > 0")


@dataclass(frozen=True)
class PageOp:
    arrival_ms: float
    op: OpKind
    lpn: int


@dataclass
class Trace:
    requests: List[Request] = field(default_factory=list)
    drain: bool = False          # run idle programs to quiescence at the end
    skipped_lines: int = 0
    source: str = "synthetic"

    def total_write_bytes(self) -> int:
        return sum(r.size for r in self.requests if r.op == OpKind.WRITE)


# MSR Cambridge lines: timestamp(100ns ticks),hostname,disk,type,offset,size,response
_MSR_FIELDS = 7
_TICKS_PER_MS = 10_000


def parse_msr_line(line: str, epoch_ticks: Optional[int] = None) -> Request:
    """Parse one comma-separated trace record.

    ``epoch_ticks`` anchors the arrival at 0 for the first record; pass the
    first record's raw timestamp for subsequent lines.
    """
    parts = line.strip().split(",")
    if len(parts) != _MSR_FIELDS:
        raise MalformedLine(f"expected {_MSR_FIELDS} fields, got {len(parts)}")
    try:
        ticks = int(parts[0])
        op_text = parts[3].strip().lower()
        offset = int(parts[4])
        size = int(parts[5])
    except ValueError as exc:
        raise MalformedLine(str(exc)) from exc
    if op_text == "write":
        op = OpKind.WRITE
    elif op_text == "read":
        op = OpKind.READ
    else:
        raise MalformedLine(f"unknown op type {parts[3]!r}")
    if size <= 0:
        raise MalformedLine(f"non-positive size {size}")
    base = ticks if epoch_ticks is None else epoch_ticks
    arrival_ms = (ticks - base) / _TICKS_PER_MS
    return Request(arrival_ms=arrival_ms, op=op, offset=offset, size=size)


def msr_disk_of(line: str) -> Optional[int]:
    parts = line.split(",")
    if len(parts) != _MSR_FIELDS:
        return None
    try:
        return int(parts[2])
    except ValueError:
        return None


def load_msr_trace(path: str, disk: Optional[int] = None) -> Trace:
    """Read an MSR-format file (plain or gzip), skipping malformed lines."""
    opener = gzip.open if str(path).endswith(".gz") else open
    requests: List[Request] = []
    skipped = 0
    epoch: Optional[int] = None
    with opener(path, "rt") as fh:
        for line in fh:
            if not line.strip():
                continue
            if disk is not None and msr_disk_of(line) != disk:
                continue
            try:
                if epoch is None:
                    epoch = int(line.split(",", 1)[0])
                req = parse_msr_line(line, epoch)
            except (MalformedLine, ValueError):
                skipped += 1
                continue
            requests.append(req)
    requests.sort(key=lambda r: r.arrival_ms)
    return Trace(requests=requests, skipped_lines=skipped, source=str(path))


def split_request(req: Request, page_size: int) -> List[PageOp]:
    """Decompose a byte-range request into the 4KB pages it covers."""
    first = req.offset // page_size
    last = (req.offset + req.size - 1) // page_size
    return [PageOp(req.arrival_ms, req.op, lpn) for lpn in range(first, last + 1)]


BURSTY_IO_SIZE = 32 * 1024


def to_bursty(trace: Trace, io_size: int = BURSTY_IO_SIZE) -> Trace:
    """Rebuild the trace as back-to-back sequential writes with no idle time.

    Reads are dropped; the total written byte count is preserved exactly.
    """
    total = trace.total_write_bytes()
    requests: List[Request] = []
    offset = 0
    remaining = total
    while remaining > 0:
        size = min(io_size, remaining)
        requests.append(Request(arrival_ms=0.0, op=OpKind.WRITE, offset=offset, size=size))
        offset += size
        remaining -= size
    return Trace(requests=requests, drain=False, source=trace.source + "|bursty")


def gen_sequential(total_bytes: int, io_size: int, inter_arrival_ms: float = 0.0,
                   start_offset: int = 0, start_ms: float = 0.0) -> Trace:
    """Deterministic sequential write stream."""
    if total_bytes and io_size <= 0:
        raise ConfigError("io_size must be > 0")
    requests: List[Request] = []
    offset = start_offset
    t = start_ms
    remaining = total_bytes
    while remaining > 0:
        size = min(io_size, remaining)
        requests.append(Request(arrival_ms=t, op=OpKind.WRITE, offset=offset, size=size))
        offset += size
        remaining -= size
        t += inter_arrival_ms
    return Trace(requests=requests, source="gen:seq")


def gen_periodic(streams: int, bytes_per_stream: int, idle_gap_ms: float,
                 io_size: int = BURSTY_IO_SIZE, inter_arrival_ms: float = 0.0) -> Trace:
    """Distinct sequential write streams separated by idle gaps.

    Stream k writes its own offset range, so the combined footprint has no
    overwrites.
    """
    requests: List[Request] = []
    t = 0.0
    for s in range(streams):
        stream = gen_sequential(
            bytes_per_stream, io_size, inter_arrival_ms,
            start_offset=s * bytes_per_stream, start_ms=t,
        )
        requests.extend(stream.requests)
        if stream.requests:
            t = stream.requests[-1].arrival_ms
        t += idle_gap_ms
    return Trace(requests=requests, source="gen:periodic")


def daily_epilogue(trace: Trace) -> Trace:
    """Mark the trace so the run drains all idle programs before finishing."""
    return Trace(requests=list(trace.requests), drain=True,
                 skipped_lines=trace.skipped_lines, source=trace.source + "|daily")
