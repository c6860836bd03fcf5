"""The four SLC-cache schemes as decision functions over device state.

baseline  - whole-block SLC cache, idle-time migrate-and-erase reclamation
ips       - two-layer SLC frontiers switched in place by host-write reprograms
ips_agc   - ips plus idle-time reprogramming fed by GC-victim valid pages
coop      - ips_agc cache first, traditional SLC overflow, cooperative reclaim
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from .errors import ConfigError, QuotaExhausted
from .flash import GeometryConfig, PhysAddr, WLMode
from .ftl import ActionKind, Device, IdleAction, Plane, WriteAction


class SchemeKind(str, Enum):
    BASELINE = "baseline"
    IPS = "ips"
    IPS_AGC = "ips_agc"
    COOP = "coop"


# Full-scale cooperative split: most blocks carry in-place-switch layers, the
# rest back the traditional cache.
COOP_DONOR_FRACTION = 1600 / 2048


@dataclass(frozen=True)
class Scheme:
    kind: SchemeKind
    slc_quota_pages: int        # per plane; SLC cache pages (two-layer or whole-block)
    trad_quota_pages: int = 0   # per plane; cooperative traditional cache cap
    donor_blocks: int = 0       # per plane; blocks carrying in-place-switch layers

    def validate(self, geometry: GeometryConfig):
        plane_blocks = geometry.blocks_per_plane
        slc_block_pages = geometry.wordlines_per_block
        pair_pages = geometry.wordlines_per_pair
        if self.donor_blocks > plane_blocks:
            raise ConfigError("donor blocks exceed blocks per plane")
        if self.kind == SchemeKind.BASELINE:
            if self.slc_quota_pages > plane_blocks * slc_block_pages:
                raise ConfigError("SLC quota exceeds whole-block SLC plane capacity")
        else:
            if self.slc_quota_pages > self.donor_blocks * pair_pages:
                raise ConfigError("SLC quota exceeds two-layer capacity of donor blocks")
        if self.trad_quota_pages > (plane_blocks - self.donor_blocks) * slc_block_pages:
            raise ConfigError("traditional quota exceeds non-donor SLC capacity")


def default_scheme(kind: SchemeKind, geometry: GeometryConfig,
                   slc_quota_pages: Optional[int] = None,
                   trad_quota_pages: Optional[int] = None,
                   donor_fraction: Optional[float] = None) -> Scheme:
    """Scheme sized for a geometry: the SLC cache defaults to the two-layer
    capacity of every block, matching the baseline cache size."""
    pair_pages = geometry.wordlines_per_pair
    if kind in (SchemeKind.IPS, SchemeKind.IPS_AGC):
        quota = slc_quota_pages if slc_quota_pages is not None \
            else geometry.blocks_per_plane * pair_pages
        donors = -(-quota // pair_pages)  # ceil
        return Scheme(kind, quota, 0, donors)
    if kind == SchemeKind.BASELINE:
        quota = slc_quota_pages if slc_quota_pages is not None \
            else geometry.blocks_per_plane * pair_pages
        return Scheme(kind, quota, 0, 0)
    if kind == SchemeKind.COOP:
        frac = COOP_DONOR_FRACTION if donor_fraction is None else donor_fraction
        if slc_quota_pages is not None:
            donors = -(-slc_quota_pages // pair_pages)
            quota = slc_quota_pages
        else:
            donors = int(geometry.blocks_per_plane * frac)
            quota = donors * pair_pages
        if trad_quota_pages is None:
            # cap at what the non-donor blocks can physically hold, reserving
            # some plain-TLC headroom for migrations and GC
            spare = max(0, geometry.blocks_per_plane - donors - 6)
            trad_quota_pages = (spare * geometry.wordlines_per_block) // 2
        return Scheme(kind, quota, trad_quota_pages, donors)
    raise ConfigError(f"unknown scheme kind {kind}")


# ------------------------------------------------------------------ routing

def _trad_action(scheme: Scheme, dev: Device, plane: Plane,
                 kind: ActionKind) -> Optional[WriteAction]:
    if plane.trad_used_pages() >= (scheme.slc_quota_pages
                                   if scheme.kind == SchemeKind.BASELINE
                                   else scheme.trad_quota_pages):
        return None
    tgt = dev.trad_write_target(plane)
    if tgt is None:
        return None
    bid, wl = tgt
    return WriteAction(kind, plane.idx, bid, wl)


def _tlc_possible(dev: Device, plane: Plane) -> bool:
    bid = plane.active["plain_tlc"]
    if bid is not None and not plane.blocks[bid].is_fully_programmed():
        return True
    return plane.free_count() > 0


def route_write(scheme: Scheme, dev: Device, plane_idx: int,
                lpn: int) -> Optional[WriteAction]:
    """Pick the write path for one host page on its allocated plane.

    Returns None when the plane cannot absorb the page in any mode (the
    engine then attempts a synchronous GC before declaring the device full).
    """
    plane = dev.planes[plane_idx]

    if scheme.kind == SchemeKind.BASELINE:
        action = _trad_action(scheme, dev, plane, ActionKind.SLC)
        if action is not None:
            return action
        if _tlc_possible(dev, plane):
            return WriteAction(ActionKind.TLC, plane_idx)
        return None

    if scheme.kind in (SchemeKind.IPS, SchemeKind.IPS_AGC):
        tgt = dev.free_slc_target(plane)
        if tgt is not None:
            return WriteAction(ActionKind.SLC, plane_idx, tgt[0], tgt[1])
        tgt = dev.reprogram_target(plane)
        if tgt is not None:
            return WriteAction(ActionKind.REPROGRAM, plane_idx, tgt[0], tgt[1])
        if _tlc_possible(dev, plane):
            return WriteAction(ActionKind.TLC, plane_idx)
        return None

    if scheme.kind == SchemeKind.COOP:
        tgt = dev.free_slc_target(plane)
        if tgt is not None:
            return WriteAction(ActionKind.SLC, plane_idx, tgt[0], tgt[1])
        action = _trad_action(scheme, dev, plane, ActionKind.TRAD_SLC)
        if action is not None:
            return action
        tgt = dev.reprogram_target(plane)
        if tgt is not None:
            return WriteAction(ActionKind.REPROGRAM, plane_idx, tgt[0], tgt[1])
        if _tlc_possible(dev, plane):
            return WriteAction(ActionKind.TLC, plane_idx)
        return None

    raise ConfigError(f"unknown scheme kind {scheme.kind}")


def traditional_slc_alloc(scheme: Scheme, dev: Device, plane_idx: int) -> int:
    """Convert a minimum-erase-count free block into traditional SLC."""
    plane = dev.planes[plane_idx]
    quota = scheme.slc_quota_pages if scheme.kind == SchemeKind.BASELINE \
        else scheme.trad_quota_pages
    if plane.trad_used_pages() >= quota:
        raise QuotaExhausted(f"plane {plane_idx}: traditional SLC quota used up")
    return dev.traditional_slc_alloc(plane)


# -------------------------------------------------------------- idle plans
#
# Plans are projections of what the scheme would do if left alone: the
# planner simulates shot-buffer fill and reprogram-slot consumption so a full
# plan is self-consistent.  The engine executes one action at a time and
# re-plans after each, so an interrupted program is simply abandoned.

def _reprogram_capacity(plane: Plane) -> int:
    """Remaining reprogram page slots across all donor frontiers."""
    avail = 0
    for bid in range(plane.donor_blocks):
        blk = plane.blocks[bid]
        rng = blk.frontier_range()
        if rng is None:
            continue
        for wi in rng:
            mode = blk.wordlines[wi].mode
            if mode == WLMode.SLC:
                avail += 2
            elif mode == WLMode.REPROG1:
                avail += 1
    return avail


def _trad_reclaim_plan(dev: Device, plane: Plane, limit: Optional[int],
                       migrate_kind: str, use_reprogram: bool) -> List[IdleAction]:
    """Walk used traditional blocks in order: move valid pages out, flush the
    partial shot, erase.  ``use_reprogram`` prefers in-place-switch slots and
    overflows to plain TLC space when they run out."""
    acts: List[IdleAction] = []
    simbuf = len(plane.migr_buf)
    avail = _reprogram_capacity(plane) if use_reprogram else 0

    def full() -> bool:
        return limit is not None and len(acts) >= limit

    for blk in plane.used_trad_blocks():
        had_pending = False
        for wi, si, _lpn in blk.valid_pages():
            src = PhysAddr(plane.idx, blk.index, wi, si)
            if src in plane.pending_srcs:
                had_pending = True
                continue
            if use_reprogram and avail > 0:
                acts.append(IdleAction("trad2ips", plane.idx, src=src))
                avail -= 1
            else:
                acts.append(IdleAction(migrate_kind, plane.idx, src=src))
                simbuf = (simbuf + 1) % 3
            if full():
                return acts
        if simbuf or had_pending:
            acts.append(IdleAction("flush_migr", plane.idx))
            simbuf = 0
            if full():
                return acts
        acts.append(IdleAction("trad_erase", plane.idx, block=blk.index))
        if full():
            return acts
    return acts


def baseline_idle_reclaim(dev: Device, plane_idx: int,
                          limit: Optional[int] = None) -> List[IdleAction]:
    """Migrate every valid cached page to TLC space, then erase the used
    blocks; each entry is one interruptible action."""
    plane = dev.planes[plane_idx]
    acts: List[IdleAction] = []
    if plane.host_buf:
        acts.append(IdleAction("flush_host", plane_idx))
        if limit is not None and len(acts) >= limit:
            return acts
    acts.extend(_trad_reclaim_plan(dev, plane, None if limit is None else limit - len(acts),
                                   "baseline_migrate", use_reprogram=False))
    return acts[:limit] if limit is not None else acts


def ips_idle_program(dev: Device, plane_idx: int,
                     limit: Optional[int] = None) -> List[IdleAction]:
    """Advanced-GC steps that reprogram used SLC pages from victim valid data.

    Plans the steps for the current victim; follow-up victims are selected
    lazily when the engine re-plans.
    """
    plane = dev.planes[plane_idx]
    acts: List[IdleAction] = []
    if plane.host_buf:
        acts.append(IdleAction("flush_host", plane_idx))
        if limit is not None and len(acts) >= limit:
            return acts
    if plane.agc_victim is not None:
        bid, cur = plane.agc_victim
        remaining = sum(
            1 for wi, si, _ in dev.planes[plane_idx].blocks[bid].valid_pages()
            if wi * 3 + si >= cur
            and PhysAddr(plane_idx, bid, wi, si) not in plane.pending_srcs
        )
    else:
        victim = dev.select_gc_victim(plane)
        if victim is None:
            return acts[:limit] if limit is not None else acts
        remaining = plane.blocks[victim].valid_page_count()
    avail = _reprogram_capacity(plane)
    steps = min(remaining, avail)
    steps += 1 if remaining <= avail else 0  # the erase once drained
    for _ in range(steps):
        acts.append(IdleAction("agc_step", plane_idx))
        if limit is not None and len(acts) >= limit:
            break
    return acts[:limit] if limit is not None else acts


def coop_idle_program(dev: Device, plane_idx: int,
                      limit: Optional[int] = None) -> List[IdleAction]:
    """Cooperative reclamation: traditional pages reprogram into the
    in-place-switch cache while slots last, overflow to TLC space, erase the
    drained blocks, then fall back to plain advanced-GC fill."""
    plane = dev.planes[plane_idx]
    acts: List[IdleAction] = []
    if plane.host_buf:
        acts.append(IdleAction("flush_host", plane_idx))
        if limit is not None and len(acts) >= limit:
            return acts
    acts.extend(_trad_reclaim_plan(dev, plane, None if limit is None else limit - len(acts),
                                   "trad2tlc", use_reprogram=True))
    if limit is not None and len(acts) >= limit:
        return acts[:limit]
    if not plane.used_trad_blocks() and not plane.migr_buf:
        more = ips_idle_program(dev, plane_idx,
                                None if limit is None else limit - len(acts))
        acts.extend(a for a in more if a.kind != "flush_host")
    return acts[:limit] if limit is not None else acts


def plan_idle(scheme: Scheme, dev: Device, plane_idx: int,
              limit: Optional[int] = None) -> List[IdleAction]:
    """Next idle actions for one plane under the scheme's reclamation rules."""
    if scheme.kind == SchemeKind.BASELINE:
        return baseline_idle_reclaim(dev, plane_idx, limit)
    if scheme.kind == SchemeKind.IPS:
        plane = dev.planes[plane_idx]
        if plane.host_buf:
            return [IdleAction("flush_host", plane_idx)]
        return []
    if scheme.kind == SchemeKind.IPS_AGC:
        return ips_idle_program(dev, plane_idx, limit)
    if scheme.kind == SchemeKind.COOP:
        return coop_idle_program(dev, plane_idx, limit)
    raise ConfigError(f"unknown scheme kind {scheme.kind}")
