"""Page-level FTL: mapping, per-plane allocation, garbage collection, and the
atomic-step advanced GC used for idle-time reprogramming.

The device is a plain deterministic value machine.  Methods mutate state and
return ``(duration_us, effects)``; the engine owns wall-clock placement and
the run report.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from .errors import (
    DeviceFull,
    EraseActiveBlock,
    NoSpaceForMigration,
    OutOfFreeBlocks,
    SimError,
)
from .flash import (
    BLOCK_EXHAUSTED,
    Block,
    GeometryConfig,
    PhysAddr,
    Role,
    SLOTS_PER_WORDLINE,
    SlotState,
    TimingConfig,
    WLMode,
    advance_frontier,
    erase_block,
)

# Event categories (counter buckets in the run report)
CAT_SLC = "SlcWrite"
CAT_REPROG = "ReprogramWrite"
CAT_TLC = "TlcWrite"
CAT_TRAD = "TradSlcWrite"
CAT_SLC2TLC = "Slc2Tlc"
CAT_GC = "GcMigration"
CAT_AGC = "AgcMigration"
CAT_PAD = "PadInvalid"
CAT_ERASE = "Erase"
CAT_READ = "Read"

HOST_CATEGORIES = (CAT_SLC, CAT_REPROG, CAT_TLC, CAT_TRAD)
DATA_CATEGORIES = HOST_CATEGORIES + (CAT_SLC2TLC, CAT_GC, CAT_AGC)


class ActionKind(Enum):
    SLC = "slc"
    REPROGRAM = "reprogram"
    TLC = "tlc"
    TRAD_SLC = "trad_slc"


@dataclass(frozen=True)
class WriteAction:
    """Routing decision for one host page; block/wl resolved where possible.

    ``block is None`` means the commit path must allocate (fresh traditional
    SLC block) or buffer (TLC one-shot) to find the physical target.
    """

    kind: ActionKind
    plane: int
    block: Optional[int] = None
    wordline: Optional[int] = None


@dataclass(frozen=True)
class IdleAction:
    kind: str                  # flush_host | flush_migr | baseline_migrate |
    plane: int                 # trad2ips | trad2tlc | trad_erase | agc_step
    src: Optional[PhysAddr] = None
    block: Optional[int] = None


class Effect(NamedTuple):
    """One physical consequence of an operation, before time stamping."""

    kind: str
    category: str
    plane: int
    lpn: Optional[int]
    src: Optional[PhysAddr]
    dst: Optional[PhysAddr]
    latency_us: int
    host: bool = False         # engine replaces latency with request latency


class GcDest(Enum):
    PLAIN_TLC = "plain_tlc"
    REPROGRAM = "reprogram"


class AgcOutcome(Enum):
    MIGRATED = "migrated"
    ERASED = "erased"
    NOTHING = "nothing"


class AgcStepResult(NamedTuple):
    outcome: AgcOutcome
    lpn: Optional[int] = None
    src: Optional[PhysAddr] = None
    dst: Optional[PhysAddr] = None
    block: Optional[int] = None


class ShotEntry(NamedTuple):
    lpn: int
    seq: int                   # host write sequence; -1 for migrations
    kind: str
    category: str
    src: Optional[PhysAddr]


class TimingUs(NamedTuple):
    slc_read: int
    tlc_read: int
    slc_program: int
    tlc_program: int
    reprogram: int
    erase: int
    xfer: int

    @classmethod
    def from_ms(cls, t: TimingConfig) -> "TimingUs":
        ms = lambda x: int(round(x * 1000))
        return cls(ms(t.slc_read), ms(t.tlc_read), ms(t.slc_program),
                   ms(t.tlc_program), ms(t.reprogram), ms(t.erase),
                   ms(t.channel_transfer_per_page))


class Plane:
    """Per-plane allocation state: free pool, active blocks, shot buffers."""

    def __init__(self, idx: int, geometry: GeometryConfig, donor_blocks: int):
        self.idx = idx
        self.donor_blocks = donor_blocks
        self.blocks = [
            Block(i, geometry, Role.IPS_DONOR if i < donor_blocks else Role.PLAIN_TLC)
            for i in range(geometry.blocks_per_plane)
        ]
        self.free = set(range(geometry.blocks_per_plane))
        self.active: dict[str, Optional[int]] = {"trad_slc": None, "plain_tlc": None}
        self.reprog_ptr = 0
        self.host_buf: list[ShotEntry] = []
        self.migr_buf: list[ShotEntry] = []
        self.agc_victim: Optional[tuple[int, int]] = None  # (block, slot scan cursor)
        self.pending_srcs: set[PhysAddr] = set()

    def free_count(self) -> int:
        return len(self.free)

    def active_ids(self):
        return {b for b in self.active.values() if b is not None}

    def trad_used_pages(self) -> int:
        return sum(
            blk.programmed_page_count()
            for blk in self.blocks
            if blk.role == Role.TRAD_SLC
        )

    def used_trad_blocks(self):
        """Traditional-SLC blocks holding data, ascending index."""
        return [
            blk for blk in self.blocks
            if blk.role == Role.TRAD_SLC and not blk.is_erased()
        ]

    def ips_live_slc_pages(self) -> int:
        n = 0
        for bid in range(self.donor_blocks):
            for wl in self.blocks[bid].wordlines:
                if wl.mode in (WLMode.SLC, WLMode.REPROG1):
                    n += 1
        return n


class Device:
    """Whole-device state: planes, logical-to-physical map, GC machinery."""

    def __init__(self, geometry: GeometryConfig, timing: TimingConfig,
                 donor_blocks: int = 0, *, tlc_per_page: bool = False,
                 gc_low_watermark: float = 0.05):
        self.geometry = geometry
        self.t = TimingUs.from_ms(timing)
        self.tlc_per_page = tlc_per_page
        self.gc_low_watermark = gc_low_watermark
        self.planes = [Plane(i, geometry, donor_blocks) for i in range(geometry.planes_total)]
        self.mapping: dict[int, PhysAddr] = {}
        self.last_seq: dict[int, int] = {}
        self._seq = 0
        self._in_gc = False
        self.sync_gc_count = 0
        self.logical_pages = (
            geometry.planes_total * geometry.blocks_per_plane * geometry.tlc_pages_per_block
        )

    # ------------------------------------------------------------------ map

    def translate(self, lpn: int) -> Optional[PhysAddr]:
        return self.mapping.get(lpn)

    def _slot(self, addr: PhysAddr):
        return self.planes[addr.plane].blocks[addr.block].wordlines[addr.wordline], addr.slot

    def _invalidate(self, addr: PhysAddr):
        wl, slot = self._slot(addr)
        if wl.slot_state[slot] != SlotState.VALID:
            raise SimError(f"invalidate of non-valid slot at {addr}")
        wl.slot_state[slot] = SlotState.INVALID
        self.planes[addr.plane].blocks[addr.block].cached_valid -= 1

    def _move_mapping(self, lpn: int, new: PhysAddr):
        old = self.mapping.get(lpn)
        if old is not None:
            self._invalidate(old)
        self.mapping[lpn] = new

    # ----------------------------------------------------------- allocation

    def pick_free_block(self, plane: Plane, purpose: str) -> int:
        """Free block with minimum erase count (ties by index).

        Donor blocks keep their role: they are never handed out as
        traditional SLC, and serve as TLC destinations only when no plain
        block is free (all-donor schemes).
        """
        donors = [b for b in plane.free if plane.blocks[b].role == Role.IPS_DONOR]
        others = [b for b in plane.free if plane.blocks[b].role != Role.IPS_DONOR]
        if purpose == "trad_slc":
            cand = others
        elif purpose == "plain_tlc":
            cand = others if others else donors
        else:
            raise SimError(f"unknown allocation purpose {purpose}")
        if not cand:
            raise OutOfFreeBlocks(f"plane {plane.idx}: no free block for {purpose}")
        best = min(cand, key=lambda b: (plane.blocks[b].erase_count, b))
        plane.free.discard(best)
        blk = plane.blocks[best]
        if purpose == "trad_slc":
            blk.role = Role.TRAD_SLC
        elif blk.role != Role.IPS_DONOR:
            blk.role = Role.PLAIN_TLC
        return best

    def traditional_slc_alloc(self, plane: Plane) -> int:
        bid = self.pick_free_block(plane, "trad_slc")
        plane.active["trad_slc"] = bid
        return bid

    def _ensure_plain_tlc(self, plane: Plane) -> Block:
        bid = plane.active["plain_tlc"]
        if bid is not None and not plane.blocks[bid].is_fully_programmed():
            return plane.blocks[bid]
        plane.active["plain_tlc"] = None
        try:
            bid = self.pick_free_block(plane, "plain_tlc")
        except OutOfFreeBlocks:
            if self._in_gc:
                raise NoSpaceForMigration(
                    f"plane {plane.idx}: no destination block during GC"
                )
            raise
        plane.active["plain_tlc"] = bid
        return plane.blocks[bid]

    # -------------------------------------------------------- write targets

    def free_slc_target(self, plane: Plane) -> Optional[tuple[int, int]]:
        """Lowest engaged donor block with an erased word line in its frontier."""
        for bid in range(plane.donor_blocks):
            blk = plane.blocks[bid]
            rng = blk.frontier_range()
            if rng is None:
                continue
            if blk.program_cursor in rng:
                return bid, blk.program_cursor
        return None

    def reprogram_target(self, plane: Plane) -> Optional[tuple[int, int]]:
        """Sticky reprogram cursor: one active donor at a time, word lines in
        order, each finished (two reprograms) before the next."""
        n = plane.donor_blocks
        if n == 0:
            return None
        start = plane.reprog_ptr if plane.reprog_ptr < n else 0
        for k in range(n):
            bid = (start + k) % n
            blk = plane.blocks[bid]
            rng = blk.frontier_range()
            if rng is None:
                continue
            for wi in rng:
                if blk.wordlines[wi].mode in (WLMode.SLC, WLMode.REPROG1):
                    plane.reprog_ptr = bid
                    return bid, wi
        return None

    def trad_write_target(self, plane: Plane) -> Optional[tuple[Optional[int], Optional[int]]]:
        """(block, wordline) in the active traditional block, (None, None) if a
        fresh block must be allocated, or None when physically impossible."""
        bid = plane.active["trad_slc"]
        if bid is not None and not plane.blocks[bid].is_fully_programmed():
            return bid, plane.blocks[bid].program_cursor
        if any(plane.blocks[b].role != Role.IPS_DONOR for b in plane.free):
            return None, None
        return None

    # -------------------------------------------------------------- commits

    def host_write_commit(self, lpn: int, action: WriteAction) -> tuple[int, list[Effect]]:
        """Apply a routed host page write; returns (duration_us, effects)."""
        plane = self.planes[action.plane]
        self._seq += 1
        seq = self._seq
        effects: list[Effect] = []
        dur = 0

        if action.kind in (ActionKind.SLC, ActionKind.TRAD_SLC):
            if action.block is None:
                bid = self.traditional_slc_alloc(plane)
            else:
                bid = action.block
            blk = plane.blocks[bid]
            if blk.is_erased():
                plane.free.discard(bid)
            wi = blk.program_next(slc=True, lpns=[lpn])
            addr = PhysAddr(plane.idx, bid, wi, 0)
            src = self.mapping.get(lpn)
            self._move_mapping(lpn, addr)
            self.last_seq[lpn] = seq
            charge = self.t.slc_program + self.t.xfer
            kind = "slc_write" if action.kind == ActionKind.SLC else "trad_slc_write"
            cat = CAT_SLC if action.kind == ActionKind.SLC else CAT_TRAD
            effects.append(Effect(kind, cat, plane.idx, lpn, src, addr, charge, host=True))
            dur += charge

        elif action.kind == ActionKind.REPROGRAM:
            blk = plane.blocks[action.block]
            slot = blk.reprogram_at(action.wordline, lpn)
            addr = PhysAddr(plane.idx, action.block, action.wordline, slot)
            src = self.mapping.get(lpn)
            self._move_mapping(lpn, addr)
            self.last_seq[lpn] = seq
            if blk.frontier_fully_tlc():
                advance_frontier(blk)
            charge = self.t.reprogram + self.t.xfer
            effects.append(Effect("reprogram_write", CAT_REPROG, plane.idx, lpn,
                                  src, addr, charge, host=True))
            dur += charge

        elif action.kind == ActionKind.TLC:
            src = self.mapping.get(lpn)
            plane.host_buf.append(ShotEntry(lpn, seq, "tlc_write", CAT_TLC, src))
            self.last_seq[lpn] = seq
            charge = (self.t.tlc_program if self.tlc_per_page else 0) + self.t.xfer
            effects.append(Effect("tlc_write", CAT_TLC, plane.idx, lpn, src, None,
                                  charge, host=True))
            dur += charge
            if len(plane.host_buf) == SLOTS_PER_WORDLINE:
                c, ev = self._close_shot(plane, "host")
                dur += c
                effects.extend(ev)
        else:
            raise SimError(f"unknown action kind {action.kind}")
        return dur, effects

    def _close_shot(self, plane: Plane, which: str) -> tuple[int, list[Effect]]:
        """Program one TLC word line from a shot buffer, padding short shots.

        Mapping commits happen here; entries superseded by a newer write of
        the same page land as invalid slots.
        """
        buf = plane.host_buf if which == "host" else plane.migr_buf
        if not buf:
            return 0, []
        entries = buf[:SLOTS_PER_WORDLINE]
        del buf[: len(entries)]
        blk = self._ensure_plain_tlc(plane)
        lpns: list[Optional[int]] = []
        fresh: list[bool] = []
        for e in entries:
            if e.seq >= 0:
                ok = self.last_seq.get(e.lpn) == e.seq
            else:
                ok = self.mapping.get(e.lpn) == e.src
            fresh.append(ok)
            lpns.append(e.lpn if ok else None)
        wi = blk.program_next(slc=False, lpns=lpns)
        effects: list[Effect] = []
        for si, (e, ok) in enumerate(zip(entries, fresh)):
            if e.src is not None:
                plane.pending_srcs.discard(e.src)
            if ok:
                self._move_mapping(e.lpn, PhysAddr(plane.idx, blk.index, wi, si))
        for si in range(len(entries), SLOTS_PER_WORDLINE):
            effects.append(Effect("pad", CAT_PAD, plane.idx, None, None,
                                  PhysAddr(plane.idx, blk.index, wi, si), 0))
        if blk.role == Role.IPS_DONOR and blk.frontier_fully_tlc():
            advance_frontier(blk)
        charge = 0 if self.tlc_per_page else self.t.tlc_program
        return charge, effects

    def flush_buffer(self, plane: Plane, which: str) -> tuple[int, list[Effect]]:
        return self._close_shot(plane, which)

    # ------------------------------------------------------------------ gc

    def select_gc_victim(self, plane: Plane) -> Optional[int]:
        """Fully-programmed non-active block with the fewest valid pages."""
        active = plane.active_ids()
        best = None
        best_key = None
        for blk in plane.blocks:
            if blk.index in active or not blk.is_fully_programmed():
                continue
            key = (blk.valid_page_count(), blk.erase_count, blk.index)
            if best_key is None or key < best_key:
                best_key = key
                best = blk.index
        return best

    def gc_candidate_with_garbage(self, plane: Plane) -> bool:
        active = plane.active_ids()
        for blk in plane.blocks:
            if blk.index in active or not blk.is_fully_programmed():
                continue
            if blk.valid_page_count() < blk.programmed_page_count():
                return True
        return False

    def gc_needed(self, plane: Plane) -> bool:
        threshold = self.gc_low_watermark * self.geometry.blocks_per_plane
        return plane.free_count() < threshold and self.gc_candidate_with_garbage(plane)

    def maybe_gc(self, plane_idx: int) -> tuple[int, list[Effect]]:
        plane = self.planes[plane_idx]
        if not self.gc_needed(plane):
            return 0, []
        self.sync_gc_count += 1
        _, dur, effects = self.run_gc(plane_idx, GcDest.PLAIN_TLC)
        return dur, effects

    def _read_charge(self, blk: Block, wi: int) -> int:
        return self.t.slc_read if blk.wordlines[wi].mode == WLMode.SLC else self.t.tlc_read

    def run_gc(self, plane_idx: int, dest: GcDest) -> tuple[int, int, list[Effect]]:
        """Drain one victim synchronously: (migrated_pages, duration_us, effects)."""
        plane = self.planes[plane_idx]
        victim_id = self.select_gc_victim(plane)
        if victim_id is None:
            return 0, 0, []
        victim = plane.blocks[victim_id]
        valids = list(victim.valid_pages())
        dur = 0
        effects: list[Effect] = []
        self._in_gc = True
        try:
            if dest == GcDest.PLAIN_TLC:
                for i in range(0, len(valids), SLOTS_PER_WORDLINE):
                    group = valids[i: i + SLOTS_PER_WORDLINE]
                    blk = self._ensure_plain_tlc(plane)
                    lpns = [lpn for (_, _, lpn) in group]
                    wi = blk.program_next(slc=False, lpns=lpns)
                    prog = self.t.tlc_program * (len(group) if self.tlc_per_page else 1)
                    for si, (swl, sslot, lpn) in enumerate(group):
                        src = PhysAddr(plane.idx, victim_id, swl, sslot)
                        dst = PhysAddr(plane.idx, blk.index, wi, si)
                        read = self._read_charge(victim, swl)
                        self._move_mapping(lpn, dst)
                        effects.append(Effect("gc_migrate", CAT_GC, plane.idx, lpn,
                                              src, dst, read))
                        dur += read
                    for si in range(len(group), SLOTS_PER_WORDLINE):
                        effects.append(Effect("pad", CAT_PAD, plane.idx, None, None,
                                              PhysAddr(plane.idx, blk.index, wi, si), 0))
                    dur += prog
                    if blk.role == Role.IPS_DONOR and blk.frontier_fully_tlc():
                        advance_frontier(blk)
            else:
                for (swl, sslot, lpn) in valids:
                    tgt = self.reprogram_target(plane)
                    if tgt is None:
                        raise NoSpaceForMigration(
                            f"plane {plane.idx}: no reprogram slots for GC victim"
                        )
                    d, ev = self._reprogram_migration(
                        plane, tgt, lpn, PhysAddr(plane.idx, victim_id, swl, sslot),
                        "gc_migrate", CAT_GC, self._read_charge(victim, swl))
                    dur += d
                    effects.extend(ev)
        finally:
            self._in_gc = False
        d, ev = self._erase(plane, victim_id)
        dur += d
        effects.extend(ev)
        return len(valids), dur, effects

    def _reprogram_migration(self, plane: Plane, tgt: tuple[int, int], lpn: int,
                             src: PhysAddr, kind: str, category: str,
                             read_charge: int) -> tuple[int, list[Effect]]:
        bid, wi = tgt
        blk = plane.blocks[bid]
        slot = blk.reprogram_at(wi, lpn)
        dst = PhysAddr(plane.idx, bid, wi, slot)
        self._move_mapping(lpn, dst)
        if blk.frontier_fully_tlc():
            advance_frontier(blk)
        charge = read_charge + self.t.reprogram
        return charge, [Effect(kind, category, plane.idx, lpn, src, dst, charge)]

    # ----------------------------------------------------------------- agc

    def agc_work_available(self, plane: Plane, dest: GcDest = GcDest.REPROGRAM) -> bool:
        """True when one more agc_step would migrate a page or issue an erase."""
        if plane.agc_victim is not None:
            bid, cur = plane.agc_victim
            nxt = self._next_victim_slot(plane.blocks[bid], cur, plane)
            if nxt is None:
                return True  # drained: the erase step remains
            return dest != GcDest.REPROGRAM or self.reprogram_target(plane) is not None
        if self.select_gc_victim(plane) is None:
            return False
        return dest != GcDest.REPROGRAM or self.reprogram_target(plane) is not None

    def _next_victim_slot(self, blk: Block, cur: int, plane: Plane) -> Optional[int]:
        total = len(blk.wordlines) * SLOTS_PER_WORDLINE
        while cur < total:
            wi, si = divmod(cur, SLOTS_PER_WORDLINE)
            if (blk.wordlines[wi].slot_state[si] == SlotState.VALID
                    and PhysAddr(plane.idx, blk.index, wi, si) not in plane.pending_srcs):
                return cur
            cur += 1
        return None

    def agc_step(self, plane_idx: int,
                 dest: GcDest = GcDest.REPROGRAM) -> tuple[AgcStepResult, int, list[Effect]]:
        """One atomic advanced-GC step: migrate a single valid page, or erase
        the drained victim, or report nothing to do."""
        plane = self.planes[plane_idx]
        if plane.agc_victim is None:
            victim = self.select_gc_victim(plane)
            if victim is None:
                return AgcStepResult(AgcOutcome.NOTHING), 0, []
            plane.agc_victim = (victim, 0)
        bid, cur = plane.agc_victim
        blk = plane.blocks[bid]
        nxt = self._next_victim_slot(blk, cur, plane)
        if nxt is None:
            if plane.migr_buf:
                fc, fev = self.flush_buffer(plane, "migr")
            else:
                fc, fev = 0, []
            if blk.valid_page_count() > 0:
                raise SimError(f"agc victim {bid} still holds valid pages")
            d, ev = self._erase(plane, bid)
            plane.agc_victim = None
            return AgcStepResult(AgcOutcome.ERASED, block=bid), fc + d, fev + ev
        wi, si = divmod(nxt, SLOTS_PER_WORDLINE)
        lpn = blk.wordlines[wi].slot_lpn[si]
        src = PhysAddr(plane.idx, bid, wi, si)
        read = self._read_charge(blk, wi)
        if dest == GcDest.REPROGRAM:
            tgt = self.reprogram_target(plane)
            if tgt is None:
                return AgcStepResult(AgcOutcome.NOTHING), 0, []
            dur, effects = self._reprogram_migration(
                plane, tgt, lpn, src, "agc_migrate", CAT_AGC, read)
            plane.agc_victim = (bid, nxt + 1)
            dst = effects[0].dst
            return AgcStepResult(AgcOutcome.MIGRATED, lpn, src, dst), dur, effects
        # PLAIN_TLC destination: buffered like any other migration stream
        plane.pending_srcs.add(src)
        plane.migr_buf.append(ShotEntry(lpn, -1, "agc_migrate", CAT_AGC, src))
        dur = read + (self.t.tlc_program if self.tlc_per_page else 0)
        effects = [Effect("agc_migrate", CAT_AGC, plane.idx, lpn, src, None, dur)]
        if len(plane.migr_buf) == SLOTS_PER_WORDLINE:
            c, ev = self._close_shot(plane, "migr")
            dur += c
            effects.extend(ev)
        plane.agc_victim = (bid, nxt + 1)
        return AgcStepResult(AgcOutcome.MIGRATED, lpn, src, None), dur, effects

    # --------------------------------------------------------------- erase

    def _erase(self, plane: Plane, bid: int) -> tuple[int, list[Effect]]:
        if bid in plane.active_ids():
            raise EraseActiveBlock(f"block {bid} is an active write target")
        blk = plane.blocks[bid]
        if blk.valid_page_count() > 0:
            raise SimError(f"erase of block {bid} with valid data")
        erase_block(blk)
        plane.free.add(bid)
        plane.pending_srcs = {a for a in plane.pending_srcs if a.block != bid}
        if plane.agc_victim is not None and plane.agc_victim[0] == bid:
            plane.agc_victim = None
        return self.t.erase, [Effect("erase", CAT_ERASE, plane.idx, None, None,
                                     PhysAddr(plane.idx, bid, -1, -1), self.t.erase)]

    def erase_block_checked(self, plane_idx: int, bid: int) -> tuple[int, list[Effect]]:
        """Erase for reclamation paths; releases the active pointer it drains."""
        plane = self.planes[plane_idx]
        if plane.active["trad_slc"] == bid:
            plane.active["trad_slc"] = None
        return self._erase(plane, bid)

    # --------------------------------------------------------- idle actions

    def execute_idle_action(self, action: IdleAction) -> tuple[int, list[Effect]]:
        plane = self.planes[action.plane]
        if action.kind == "flush_host":
            return self.flush_buffer(plane, "host")
        if action.kind == "flush_migr":
            return self.flush_buffer(plane, "migr")
        if action.kind in ("baseline_migrate", "trad2tlc"):
            src = action.src
            blk = plane.blocks[src.block]
            lpn = blk.wordlines[src.wordline].slot_lpn[src.slot]
            kind = "slc2tlc_migrate" if action.kind == "baseline_migrate" else "trad2tlc_migrate"
            plane.pending_srcs.add(src)
            plane.migr_buf.append(ShotEntry(lpn, -1, kind, CAT_SLC2TLC, src))
            dur = self._read_charge(blk, src.wordline)
            dur += self.t.tlc_program if self.tlc_per_page else 0
            effects = [Effect(kind, CAT_SLC2TLC, plane.idx, lpn, src, None, dur)]
            if len(plane.migr_buf) == SLOTS_PER_WORDLINE:
                c, ev = self._close_shot(plane, "migr")
                dur += c
                effects.extend(ev)
            return dur, effects
        if action.kind == "trad2ips":
            src = action.src
            blk = plane.blocks[src.block]
            lpn = blk.wordlines[src.wordline].slot_lpn[src.slot]
            tgt = self.reprogram_target(plane)
            if tgt is None:
                raise SimError("trad2ips scheduled without a reprogram slot")
            return self._reprogram_migration(
                plane, tgt, lpn, src, "trad2ips_reprogram", CAT_SLC2TLC,
                self._read_charge(blk, src.wordline))
        if action.kind == "trad_erase":
            return self.erase_block_checked(action.plane, action.block)
        if action.kind == "agc_step":
            _, dur, effects = self.agc_step(action.plane)
            return dur, effects
        raise SimError(f"unknown idle action {action.kind}")

    # --------------------------------------------------------------- reads

    def read_lookup(self, lpn: int) -> tuple[str, Optional[int], int]:
        """(kind, plane, latency_us) for a host read of one page."""
        addr = self.mapping.get(lpn)
        if addr is not None:
            wl, _ = self._slot(addr)
            lat = self.t.slc_read if wl.mode == WLMode.SLC else self.t.tlc_read
            return "read", addr.plane, lat + self.t.xfer
        for plane in self.planes:
            for e in plane.host_buf:
                if e.lpn == lpn and self.last_seq.get(lpn) == e.seq:
                    return "buffer_read", plane.idx, 0
        return "read_miss", None, 0

    # --------------------------------------------------------------- audit

    def audit(self, slc_quota_pages: Optional[int] = None,
              trad_quota_pages: Optional[int] = None):
        """Structural invariants: slot/mode shape, frontier shape, reprogram
        budget, mapping-vs-valid conservation, quota caps."""
        valid_total = 0
        for plane in self.planes:
            for blk in plane.blocks:
                for wi, wl in enumerate(blk.wordlines):
                    if wl.reprogram_count > 4:
                        raise SimError(f"reprogram budget exceeded at block {blk.index}")
                    occ = wl.occupied_slots()
                    expect = {WLMode.ERASED: 0, WLMode.SLC: 1,
                              WLMode.REPROG1: 2, WLMode.TLC: 3}[wl.mode]
                    if occ != expect:
                        raise SimError(
                            f"mode/slot mismatch block {blk.index} wl {wi}: "
                            f"{wl.mode.name} with {occ} occupied")
                    if (wi < blk.program_cursor) != (wl.mode != WLMode.ERASED):
                        raise SimError(f"cursor inconsistency block {blk.index} wl {wi}")
                    for si in range(SLOTS_PER_WORDLINE):
                        if wl.slot_state[si] == SlotState.VALID:
                            valid_total += 1
                            addr = PhysAddr(plane.idx, blk.index, wi, si)
                            if self.mapping.get(wl.slot_lpn[si]) != addr:
                                raise SimError(f"mapping does not point back at {addr}")
                if blk.cached_valid != blk.recount_valid() or \
                        blk.cached_occupied != blk.recount_programmed():
                    raise SimError(f"count cache drift in block {blk.index}")
                f = blk.slc_frontier
                if f is not None:
                    per = self.geometry.wordlines_per_pair
                    for wi in range(0, f * per):
                        if blk.wordlines[wi].mode != WLMode.TLC:
                            raise SimError(f"non-TLC word line below frontier in {blk.index}")
                    for wi in range((f + 1) * per, len(blk.wordlines)):
                        if blk.wordlines[wi].mode != WLMode.ERASED:
                            raise SimError(f"programmed word line above frontier in {blk.index}")
            if slc_quota_pages is not None and plane.ips_live_slc_pages() > slc_quota_pages:
                raise SimError(f"plane {plane.idx}: IPS SLC quota exceeded")
            if trad_quota_pages is not None and plane.trad_used_pages() > trad_quota_pages:
                raise SimError(f"plane {plane.idx}: traditional SLC quota exceeded")
        if valid_total != len(self.mapping):
            raise SimError(
                f"conservation broken: {valid_total} valid slots vs "
                f"{len(self.mapping)} mapped pages")

    def erase_histogram(self) -> dict[tuple[int, int], int]:
        return {
            (p.idx, blk.index): blk.erase_count
            for p in self.planes for blk in p.blocks if blk.erase_count
        }
