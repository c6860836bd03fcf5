"""Event-log replay checks.

The run report's event stream carries enough information (kind, lpn, source
and destination addresses) to re-derive block lifecycles without the live
device, so invariants like "every valid traditional page is migrated exactly
once before its block's erase" are verified here from the log alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .errors import SimError
from .flash import GeometryConfig
from .metrics import RunReport

_PROGRAM_KINDS = {
    "slc_write", "trad_slc_write", "tlc_write", "slc2tlc_migrate",
    "trad2ips_reprogram", "trad2tlc_migrate", "gc_migrate", "agc_migrate",
}
_MIGRATION_KINDS = {
    "slc2tlc_migrate", "trad2ips_reprogram", "trad2tlc_migrate",
    "gc_migrate", "agc_migrate",
}
TRAD_RECLAIM_KINDS = {"trad2ips_reprogram", "trad2tlc_migrate"}


@dataclass
class _BlockTrack:
    valid: Dict[Tuple[int, int], int] = field(default_factory=dict)  # (wl, slot) -> lpn
    migrated: Set[Tuple[int, int]] = field(default_factory=set)
    programmed: int = 0
    trad_program_kinds: Set[str] = field(default_factory=set)


class LogReplay:
    """Replays program/erase events into per-block slot occupancy."""

    def __init__(self):
        self.blocks: Dict[Tuple[int, int], _BlockTrack] = {}
        self.lpn_home: Dict[int, Tuple] = {}

    def _track(self, plane: int, block: int) -> _BlockTrack:
        return self.blocks.setdefault((plane, block), _BlockTrack())

    def apply(self, ev) -> None:
        if ev.kind == "erase":
            self.blocks.pop((ev.plane, ev.dst[1]), None)
            return
        if ev.kind == "pad":
            self._track(ev.dst[0], ev.dst[1]).programmed += 1
            return
        if ev.kind not in _PROGRAM_KINDS:
            return
        # invalidate the superseded copy
        if ev.kind in _MIGRATION_KINDS and ev.src is not None:
            src_track = self.blocks.get((ev.src[0], ev.src[1]))
            if src_track is not None:
                src_track.valid.pop((ev.src[2], ev.src[3]), None)
                src_track.migrated.add((ev.src[2], ev.src[3]))
        else:
            old = self.lpn_home.get(ev.lpn)
            if old is not None:
                t = self.blocks.get((old[0], old[1]))
                if t is not None:
                    t.valid.pop((old[2], old[3]), None)
        if ev.dst is not None:
            track = self._track(ev.dst[0], ev.dst[1])
            track.programmed += 1
            track.valid[(ev.dst[2], ev.dst[3])] = ev.lpn
            if ev.kind == "trad_slc_write":
                track.trad_program_kinds.add(ev.kind)
            self.lpn_home[ev.lpn] = tuple(ev.dst)


def check_trad_reclaim_conservation(report: RunReport) -> int:
    """Every valid traditional-SLC page leaves through exactly one reclaim
    migration before its block's erase; returns the number of erased
    traditional blocks checked."""
    replay = LogReplay()
    checked = 0
    # destination address for host tlc writes is unknown at buffer time, so
    # treat tlc_write events without dst as programs that never land in a
    # traditional block (they cannot: traditional blocks take SLC programs).
    for ev in report.events:
        if ev.kind == "erase":
            key = (ev.plane, ev.dst[1])
            track = replay.blocks.get(key)
            if track is not None and track.trad_program_kinds:
                if track.valid:
                    raise SimError(
                        f"traditional block {key} erased with "
                        f"{len(track.valid)} unaccounted valid pages")
                checked += 1
        replay.apply(ev)
    return checked


def check_migration_uniqueness(report: RunReport):
    """No source slot is migrated twice within one erase cycle."""
    seen: Dict[Tuple, int] = {}
    erased_epoch: Dict[Tuple[int, int], int] = {}
    for i, ev in enumerate(report.events):
        if ev.kind == "erase":
            erased_epoch[(ev.plane, ev.dst[1])] = i
            continue
        if ev.kind in _MIGRATION_KINDS and ev.src is not None:
            key = tuple(ev.src)
            prev = seen.get(key)
            if prev is not None:
                epoch = erased_epoch.get((ev.src[0], ev.src[1]), -1)
                if prev > epoch:
                    raise SimError(f"slot {key} migrated twice without an erase")
            seen[key] = i


def check_sequential_programming(report: RunReport):
    """Word-line programs inside a block are strictly increasing between
    erases (one-shot programs and SLC programs alike)."""
    cursor: Dict[Tuple[int, int], int] = {}
    seen_wl: Dict[Tuple[int, int], Set[int]] = {}
    for ev in report.events:
        if ev.kind == "erase":
            cursor.pop((ev.plane, ev.dst[1]), None)
            seen_wl.pop((ev.plane, ev.dst[1]), None)
            continue
        if ev.kind in ("slc_write", "trad_slc_write") or (
                ev.kind in _PROGRAM_KINDS and ev.dst is not None
                and ev.dst[3] == 0) or ev.kind == "pad":
            if ev.dst is None:
                continue
            key = (ev.plane, ev.dst[1])
            wl = ev.dst[2]
            wls = seen_wl.setdefault(key, set())
            if wl in wls:
                continue  # later slots of the same one-shot word line
            last = cursor.get(key, -1)
            if wl < last:
                raise SimError(f"out-of-order program of word line {wl} in {key}")
            cursor[key] = wl
            wls.add(wl)


def check_reprogram_frontier(report: RunReport, geometry: GeometryConfig):
    """Each reprogram lands inside a two-consecutive-layer window that only
    moves forward between erases."""
    per_pair = geometry.wordlines_per_pair
    frontier: Dict[Tuple[int, int], int] = {}
    for ev in report.events:
        if ev.kind == "erase":
            frontier.pop((ev.plane, ev.dst[1]), None)
            continue
        if ev.kind in ("reprogram_write", "trad2ips_reprogram") or (
                ev.kind in ("agc_migrate", "gc_migrate")
                and ev.dst is not None and ev.dst[3] > 0):
            if ev.dst is None:
                continue
            key = (ev.plane, ev.dst[1])
            pair = ev.dst[2] // per_pair
            prev = frontier.get(key)
            if prev is not None and pair < prev:
                raise SimError(
                    f"reprogram moved backwards to pair {pair} in block {key}")
            frontier[key] = pair


def check_reprogram_budget(report: RunReport):
    """At most two reprogram operations per word line per erase cycle."""
    counts: Dict[Tuple, int] = {}
    for ev in report.events:
        if ev.kind == "erase":
            gone = [k for k in counts if (k[0], k[1]) == (ev.plane, ev.dst[1])]
            for k in gone:
                del counts[k]
            continue
        if ev.dst is not None and ev.dst[3] > 0 and ev.kind in (
                "reprogram_write", "trad2ips_reprogram", "agc_migrate", "gc_migrate"):
            key = (ev.plane, ev.dst[1], ev.dst[2])
            counts[key] = counts.get(key, 0) + 1
            if counts[key] > 2:
                raise SimError(f"word line {key} reprogrammed more than twice")


def check_coop_trad_only_when_cache_full(report: RunReport,
                                         geometry: GeometryConfig,
                                         donor_blocks: int):
    """Cooperative runs route to the traditional cache only while the plane's
    in-place-switch cache has no erased frontier page, derived by replaying
    donor-block slot occupancy from the log."""
    per_pair = geometry.wordlines_per_pair
    pairs = geometry.layer_pairs_per_block
    wpb = geometry.wordlines_per_block
    # occupied-slot count per (plane, donor block, word line)
    occ: Dict[Tuple[int, int], List[int]] = {}

    def block_free_pages(plane: int, block: int) -> int:
        slots = occ.get((plane, block))
        if slots is None:
            return per_pair  # pristine donor: frontier pair 0 fully erased
        cursor = sum(1 for c in slots if c > 0)
        full_wls = 0
        for c in slots:
            if c == 3:
                full_wls += 1
            else:
                break
        frontier = full_wls // per_pair
        if frontier >= pairs:
            return 0
        return max(0, (frontier + 1) * per_pair - cursor)

    def plane_free_pages(plane: int) -> int:
        return sum(block_free_pages(plane, b) for b in range(donor_blocks))

    for ev in report.events:
        if ev.kind == "erase":
            occ.pop((ev.plane, ev.dst[1]), None)
            continue
        if ev.kind == "trad_slc_write" and plane_free_pages(ev.plane) > 0:
            raise SimError(
                f"traditional write at t={ev.time_us} while plane "
                f"{ev.plane} still had free cache pages")
        if (ev.dst is not None and len(ev.dst) == 4
                and ev.dst[1] < donor_blocks
                and (ev.kind in _PROGRAM_KINDS or ev.kind == "pad")):
            slots = occ.setdefault((ev.plane, ev.dst[1]), [0] * wpb)
            slots[ev.dst[2]] += 1
