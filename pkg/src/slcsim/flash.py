"""Physical flash model: geometry, word-line/block state machines, capacity math.

This layer is deliberately timing-free and policy-free.  A word line moves
through ERASED -> SLC -> REPROG1 -> TLC (via reprogram) or ERASED -> TLC
(one-shot), and nothing else; blocks enforce strictly sequential word-line
programming and the two-layer reprogram window.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple, Optional, Sequence

from .errors import (
    ConfigError,
    EraseActiveBlock,
    FrontierNotFullyReprogrammed,
    OutOfOrderProgram,
    ProgramOnNonErased,
    ReprogramBudgetExceeded,
    ReprogramOnErased,
    ReprogramOnFullTlc,
    ReprogramOutsideFrontier,
)

SLOTS_PER_WORDLINE = 3
REPROGRAM_LIMIT = 4  # hard device limit; the schemes here use at most 2


class WLMode(IntEnum):
    ERASED = 0
    SLC = 1
    REPROG1 = 2
    TLC = 3


class SlotState(IntEnum):
    FREE = 0
    VALID = 1
    INVALID = 2


class Role(Enum):
    IPS_DONOR = "ips_donor"
    TRAD_SLC = "trad_slc"
    PLAIN_TLC = "plain_tlc"


class CapacityMode(Enum):
    TLC = "tlc"
    SLC_WHOLE_BLOCK = "slc_whole_block"
    IPS_TWO_LAYER = "ips_two_layer"


class PhysAddr(NamedTuple):
    plane: int
    block: int
    wordline: int
    slot: int


@dataclass(frozen=True)
class GeometryConfig:
    """Shape of the simulated device.

    Planes are flattened elsewhere; ``describe_plane`` recovers the
    channel/chip/die/plane indices for a flat plane number.
    """

    channels: int = 8
    chips_per_channel: int = 4
    dies_per_chip: int = 2
    planes_per_die: int = 2
    blocks_per_plane: int = 2048
    wordlines_per_layer: int = 2
    layers_per_block: int = 64
    page_size: int = 4096

    def __post_init__(self):
        counts = (
            self.channels,
            self.chips_per_channel,
            self.dies_per_chip,
            self.planes_per_die,
            self.blocks_per_plane,
            self.wordlines_per_layer,
            self.layers_per_block,
        )
        if any(c < 1 for c in counts):
            raise ConfigError("all geometry counts must be >= 1")
        if self.page_size < 1 or self.page_size & (self.page_size - 1):
            raise ConfigError("page_size must be a power of two")
        if self.layers_per_block % 2:
            raise ConfigError("layers_per_block must be even (SLC layers come in pairs)")

    @property
    def planes_total(self) -> int:
        return (
            self.channels
            * self.chips_per_channel
            * self.dies_per_chip
            * self.planes_per_die
        )

    @property
    def wordlines_per_block(self) -> int:
        return self.wordlines_per_layer * self.layers_per_block

    @property
    def tlc_pages_per_block(self) -> int:
        return SLOTS_PER_WORDLINE * self.wordlines_per_block

    @property
    def layer_pairs_per_block(self) -> int:
        return self.layers_per_block // 2

    @property
    def wordlines_per_pair(self) -> int:
        return 2 * self.wordlines_per_layer

    def describe_plane(self, flat: int) -> dict:
        """Break a flat plane index into channel/chip/die/plane indices."""
        if not 0 <= flat < self.planes_total:
            raise ConfigError(f"plane index {flat} out of range")
        channel = flat % self.channels
        rest = flat // self.channels
        chip = rest % self.chips_per_channel
        rest //= self.chips_per_channel
        die = rest % self.dies_per_chip
        plane = rest // self.dies_per_chip
        return {"channel": channel, "chip": chip, "die": die, "plane": plane}


@dataclass(frozen=True)
class TimingConfig:
    """Operation latencies in milliseconds."""

    slc_read: float = 0.02
    tlc_read: float = 0.066
    slc_program: float = 0.5
    tlc_program: float = 3.0
    reprogram: float = 3.0
    erase: float = 10.0
    channel_transfer_per_page: float = 0.0

    def __post_init__(self):
        for name in (
            "slc_read",
            "tlc_read",
            "slc_program",
            "tlc_program",
            "reprogram",
            "erase",
            "channel_transfer_per_page",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"timing {name} must be >= 0")


class WordLine:
    """One programmable row: up to three page slots plus a reprogram budget."""

    __slots__ = ("mode", "reprogram_count", "slot_state", "slot_lpn")

    def __init__(self):
        self.mode = WLMode.ERASED
        self.reprogram_count = 0
        self.slot_state = [SlotState.FREE] * SLOTS_PER_WORDLINE
        self.slot_lpn: list[Optional[int]] = [None] * SLOTS_PER_WORDLINE

    def occupied_slots(self) -> int:
        return sum(1 for s in self.slot_state if s != SlotState.FREE)

    def valid_slots(self) -> int:
        return sum(1 for s in self.slot_state if s == SlotState.VALID)

    def reset(self):
        self.mode = WLMode.ERASED
        self.reprogram_count = 0
        for i in range(SLOTS_PER_WORDLINE):
            self.slot_state[i] = SlotState.FREE
            self.slot_lpn[i] = None


def program_wordline(wl: WordLine, slc: bool, lpns: Sequence[Optional[int]]):
    """First program of an erased word line.

    SLC takes one page into slot 0; TLC one-shot fills all three slots,
    padding missing pages with invalid placeholders.
    """
    if wl.mode != WLMode.ERASED:
        raise ProgramOnNonErased(f"program on word line in mode {wl.mode.name}")
    if slc:
        if len(lpns) != 1:
            raise ConfigError("SLC program takes exactly one page")
        wl.mode = WLMode.SLC
        wl.slot_state[0] = SlotState.VALID if lpns[0] is not None else SlotState.INVALID
        wl.slot_lpn[0] = lpns[0]
    else:
        if not 1 <= len(lpns) <= SLOTS_PER_WORDLINE:
            raise ConfigError("one-shot program takes 1..3 pages")
        wl.mode = WLMode.TLC
        for i in range(SLOTS_PER_WORDLINE):
            lpn = lpns[i] if i < len(lpns) else None
            wl.slot_state[i] = SlotState.VALID if lpn is not None else SlotState.INVALID
            wl.slot_lpn[i] = lpn


def reprogram_wordline(wl: WordLine, lpn: Optional[int]) -> int:
    """Raise the word line one mode step in place, adding one page.

    Returns the slot index that received the page.  Slot 0 keeps whatever
    the original SLC program left there.
    """
    if wl.mode == WLMode.ERASED:
        raise ReprogramOnErased("reprogram on erased word line")
    if wl.mode == WLMode.TLC:
        raise ReprogramOnFullTlc("word line already holds three pages")
    if wl.reprogram_count >= REPROGRAM_LIMIT:
        raise ReprogramBudgetExceeded(
            f"reprogram count would exceed {REPROGRAM_LIMIT}"
        )
    slot = 1 if wl.mode == WLMode.SLC else 2
    wl.mode = WLMode.REPROG1 if slot == 1 else WLMode.TLC
    wl.slot_state[slot] = SlotState.VALID if lpn is not None else SlotState.INVALID
    wl.slot_lpn[slot] = lpn
    wl.reprogram_count += 1
    return slot


class Block:
    """Ordered word lines (layer-major) with a cursor and an SLC frontier.

    Valid/occupied page counts are cached for the allocator's hot paths and
    cross-checked against a recount by the device audit.
    """

    __slots__ = ("index", "role", "geometry", "wordlines", "program_cursor",
                 "slc_frontier", "erase_count", "cached_valid", "cached_occupied")

    def __init__(self, index: int, geometry: GeometryConfig, role: Role = Role.PLAIN_TLC):
        self.index = index
        self.role = role
        self.geometry = geometry
        self.wordlines = [WordLine() for _ in range(geometry.wordlines_per_block)]
        self.program_cursor = 0
        self.slc_frontier: Optional[int] = 0 if role == Role.IPS_DONOR else None
        self.erase_count = 0
        self.cached_valid = 0
        self.cached_occupied = 0

    # -- frontier helpers ---------------------------------------------------

    def frontier_range(self) -> Optional[range]:
        if self.slc_frontier is None:
            return None
        per_pair = self.geometry.wordlines_per_pair
        start = self.slc_frontier * per_pair
        return range(start, start + per_pair)

    def frontier_fully_tlc(self) -> bool:
        rng = self.frontier_range()
        if rng is None:
            return False
        return all(self.wordlines[i].mode == WLMode.TLC for i in rng)

    # -- state queries ------------------------------------------------------

    def is_fully_programmed(self) -> bool:
        return self.program_cursor >= len(self.wordlines)

    def is_erased(self) -> bool:
        return self.program_cursor == 0

    def valid_page_count(self) -> int:
        return self.cached_valid

    def programmed_page_count(self) -> int:
        return self.cached_occupied

    def recount_valid(self) -> int:
        return sum(wl.valid_slots() for wl in self.wordlines)

    def recount_programmed(self) -> int:
        return sum(wl.occupied_slots() for wl in self.wordlines)

    def valid_pages(self):
        """Yield (wordline, slot, lpn) for every valid slot, in address order."""
        for wi, wl in enumerate(self.wordlines):
            for si in range(SLOTS_PER_WORDLINE):
                if wl.slot_state[si] == SlotState.VALID:
                    yield wi, si, wl.slot_lpn[si]

    # -- mutations ----------------------------------------------------------

    def program_next(self, slc: bool, lpns: Sequence[Optional[int]]) -> int:
        """Program the word line at the cursor; returns its index."""
        if self.is_fully_programmed():
            raise OutOfOrderProgram(f"block {self.index} fully programmed")
        idx = self.program_cursor
        program_wordline(self.wordlines[idx], slc, lpns)
        self.program_cursor += 1
        self.cached_occupied += 1 if slc else SLOTS_PER_WORDLINE
        self.cached_valid += sum(1 for lpn in lpns if lpn is not None)
        return idx

    def reprogram_at(self, wl_index: int, lpn: Optional[int]) -> int:
        """Reprogram one word line inside the current frontier pair."""
        rng = self.frontier_range()
        if rng is None or wl_index not in rng:
            raise ReprogramOutsideFrontier(
                f"word line {wl_index} outside frontier of block {self.index}"
            )
        slot = reprogram_wordline(self.wordlines[wl_index], lpn)
        self.cached_occupied += 1
        if lpn is not None:
            self.cached_valid += 1
        return slot


def erase_block(block: Block):
    """Wipe every word line; the frontier restarts at pair 0 for donors."""
    for wl in block.wordlines:
        wl.reset()
    block.program_cursor = 0
    block.erase_count += 1
    block.cached_valid = 0
    block.cached_occupied = 0
    block.slc_frontier = 0 if block.role == Role.IPS_DONOR else None


BLOCK_EXHAUSTED = -1


def advance_frontier(block: Block) -> int:
    """Move the SLC frontier to the next layer pair.

    Returns the new pair index, or BLOCK_EXHAUSTED when the block has no
    layers left (it then behaves as an ordinary fully-programmed TLC block).
    """
    if block.slc_frontier is None:
        raise FrontierNotFullyReprogrammed(f"block {block.index} has no frontier")
    if not block.frontier_fully_tlc():
        raise FrontierNotFullyReprogrammed(
            f"frontier pair {block.slc_frontier} of block {block.index} not fully TLC"
        )
    nxt = block.slc_frontier + 1
    if nxt >= block.geometry.layer_pairs_per_block:
        block.slc_frontier = None
        return BLOCK_EXHAUSTED
    block.slc_frontier = nxt
    return nxt


def capacity_of(geometry: GeometryConfig, mode: CapacityMode) -> int:
    """Usable bytes of the device under one allocation mode."""
    blocks = geometry.planes_total * geometry.blocks_per_plane
    if mode == CapacityMode.TLC:
        pages_per_block = geometry.tlc_pages_per_block
    elif mode == CapacityMode.SLC_WHOLE_BLOCK:
        pages_per_block = geometry.wordlines_per_block
    elif mode == CapacityMode.IPS_TWO_LAYER:
        pages_per_block = geometry.wordlines_per_pair
    else:
        raise ConfigError(f"unknown capacity mode {mode}")
    return blocks * pages_per_block * geometry.page_size
