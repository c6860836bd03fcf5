"""Deterministic discrete-event engine: request arrival, per-plane FIFO
service, idle detection, and one-at-a-time idle program execution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .errors import DeviceFull, OutOfFreeBlocks
from .flash import GeometryConfig, TimingConfig
from .ftl import ActionKind, Device, Effect, GcDest, IdleAction, TimingUs
from .metrics import Event, RunReport
from .policy import Scheme, SchemeKind, plan_idle, route_write
from .workload import OpKind, Trace, split_request

DEFAULT_IDLE_THRESHOLD_MS = 100.0


def service_latency(action_kind: ActionKind, timing: TimingConfig,
                    pages: int = 1, tlc_per_page: bool = False) -> float:
    """Service time in ms for one write action (one-shot covers up to three
    buffered pages at a single TLC program cost)."""
    t = TimingUs.from_ms(timing)
    if action_kind in (ActionKind.SLC, ActionKind.TRAD_SLC):
        us = t.slc_program + t.xfer * pages
    elif action_kind == ActionKind.REPROGRAM:
        us = t.reprogram + t.xfer * pages
    elif action_kind == ActionKind.TLC:
        us = (t.tlc_program * pages if tlc_per_page else t.tlc_program) + t.xfer * pages
    else:
        raise ValueError(f"unknown action {action_kind}")
    return us / 1000.0


@dataclass
class _PageRef:
    arrival_us: int
    op: OpKind
    lpn: int


class Engine:
    def __init__(self, geometry: GeometryConfig, timing: TimingConfig,
                 scheme: Scheme, seed: int = 0, *,
                 idle_threshold_ms: float = DEFAULT_IDLE_THRESHOLD_MS,
                 tlc_per_page: bool = False, gc_low_watermark: float = 0.05,
                 audit_every: int = 0):
        scheme.validate(geometry)
        self.geometry = geometry
        self.timing = timing
        self.scheme = scheme
        self.seed = seed
        self.device = Device(geometry, timing, scheme.donor_blocks,
                             tlc_per_page=tlc_per_page,
                             gc_low_watermark=gc_low_watermark)
        self.idle_threshold_us = int(round(idle_threshold_ms * 1000))
        self.audit_every = audit_every
        self.busy = [0] * geometry.planes_total
        self.chan_busy = [0] * geometry.channels
        self.report = RunReport(scheme=scheme.kind.value, seed=seed,
                                page_size=geometry.page_size,
                                config={"tlc_per_page": tlc_per_page,
                                        "idle_threshold_ms": idle_threshold_ms})
        self._rr = 0
        self._idle_rr = 0
        self._events_since_audit = 0

    # ------------------------------------------------------------- helpers

    def _record(self, effects: List[Effect], time_us: int,
                host_arrival: Optional[int] = None):
        for eff in effects:
            latency = eff.latency_us
            if eff.host and host_arrival is not None:
                latency = time_us - host_arrival
            self.report.add_event(Event(time_us, eff.plane, eff.kind, eff.category,
                                        latency, eff.lpn, eff.src, eff.dst))
        self._events_since_audit += len(effects)
        if self.audit_every and self._events_since_audit >= self.audit_every:
            self._events_since_audit = 0
            if self.scheme.kind == SchemeKind.BASELINE:
                self.device.audit(None, self.scheme.slc_quota_pages)
            else:
                self.device.audit(self.scheme.slc_quota_pages,
                                  self.scheme.trad_quota_pages or None)

    def _quiet_time(self) -> int:
        return max(self.busy)

    # -------------------------------------------------------------- host io

    def _service_write(self, op: _PageRef) -> bool:
        """Route, commit and schedule one host page write.  Returns False when
        the device cannot absorb it (run ends with the device-full flag)."""
        plane_idx = self._rr % self.geometry.planes_total
        self._rr += 1
        dev = self.device
        pre_us = 0
        pre_effects: List[Effect] = []
        d, ev = dev.maybe_gc(plane_idx)
        pre_us += d
        pre_effects.extend(ev)
        action = route_write(self.scheme, dev, plane_idx, op.lpn)
        if action is None:
            _, d, ev = dev.run_gc(plane_idx, GcDest.PLAIN_TLC)
            dev.sync_gc_count += 1
            pre_us += d
            pre_effects.extend(ev)
            action = route_write(self.scheme, dev, plane_idx, op.lpn)
            if action is None:
                return False
        try:
            dur, effects = dev.host_write_commit(op.lpn, action)
        except (OutOfFreeBlocks, DeviceFull):
            return False
        start = max(op.arrival_us, self.busy[plane_idx])
        completion = start + pre_us + dur
        self.busy[plane_idx] = completion
        self._record(pre_effects, start + pre_us)
        self._record(effects, completion, host_arrival=op.arrival_us)
        self.report.host_page_writes += 1
        self.report.write_completions.append((op.arrival_us, completion))
        return True

    def _service_read(self, op: _PageRef):
        kind, plane_idx, latency = self.device.read_lookup(op.lpn)
        if plane_idx is None:
            self.report.add_event(Event(op.arrival_us, -1, kind, "Read", 0,
                                        op.lpn, None, None))
            return
        start = max(op.arrival_us, self.busy[plane_idx])
        completion = start + latency
        self.busy[plane_idx] = completion
        self.report.add_event(Event(completion, plane_idx, kind, "Read",
                                    completion - op.arrival_us, op.lpn,
                                    self.device.translate(op.lpn), None))

    # ----------------------------------------------------------------- idle

    def _next_idle_action(self) -> Optional[IdleAction]:
        n = self.geometry.planes_total
        for k in range(n):
            plane_idx = (self._idle_rr + k) % n
            plan = plan_idle(self.scheme, self.device, plane_idx, limit=1)
            if plan:
                self._idle_rr = (plane_idx + 1) % n
                return plan[0]
        return None

    def _run_idle(self, until_us: Optional[int]):
        """Dispatch idle actions one at a time once the queue has been empty
        for the idle threshold; a pending arrival defers further actions."""
        now = self._quiet_time() + self.idle_threshold_us
        if until_us is not None and until_us <= now:
            return
        while until_us is None or now < until_us:
            action = self._next_idle_action()
            if action is None:
                return
            dur, effects = self.device.execute_idle_action(action)
            now += dur
            self.busy[action.plane] = max(self.busy[action.plane], now)
            self._record(effects, now)

    # ------------------------------------------------------------------ run

    def run(self, trace: Trace) -> RunReport:
        dev = self.device
        ops: List[_PageRef] = []
        for req in trace.requests:
            for page in split_request(req, self.geometry.page_size):
                ops.append(_PageRef(int(round(page.arrival_ms * 1000)), page.op,
                                    page.lpn % dev.logical_pages))
        self.report.skipped_lines = trace.skipped_lines
        for op in ops:
            self._run_idle(op.arrival_us)
            if op.op == OpKind.WRITE:
                if not self._service_write(op):
                    self.report.device_full = True
                    break
            else:
                self._service_read(op)
        if trace.drain and not self.report.device_full:
            self._run_idle(None)
        self._final_flush()
        self.report.end_time_us = self._quiet_time()
        self.report.erase_histogram = dev.erase_histogram()
        self.report.sync_gc_count = dev.sync_gc_count
        return self.report

    def _final_flush(self):
        """Commit any partial one-shot buffers so the report is self-contained."""
        for plane in self.device.planes:
            for which in ("host", "migr"):
                buf = plane.host_buf if which == "host" else plane.migr_buf
                while buf:
                    dur, effects = self.device.flush_buffer(plane, which)
                    t = self.busy[plane.idx] + dur
                    self.busy[plane.idx] = t
                    self._record(effects, t)


def run(geometry: GeometryConfig, timing: TimingConfig, scheme: Scheme,
        trace: Trace, seed: int = 0, **kwargs) -> RunReport:
    """One deterministic simulation; identical inputs give identical reports."""
    return Engine(geometry, timing, scheme, seed, **kwargs).run(trace)
