"""Set-associative compressed LLC.

Four operating modes share one state machine:

    baseline  one uncompressed block per line
    yacc      superblock-only compression: a line holds 4x16B or 2x32B
              blocks of one aligned 4-block group, no signatures
    touche    signature slots, trailer records and superblock markers
    ideal     three arbitrary blocks (or four, see ``ideal_arbitrary4``) or
              a 4-block superblock per line, no metadata cost, exact tags

Addresses are split superblock-first: bits 7..6 pick the neighbor inside a
4-block group, the next ``set_index_bits`` bits pick the set and the rest
form the tag. The 29-bit full tag is ``(addr >> (8 + set_bits)) << 2 |
neighbor``, so the four neighbors of a group share a set and differ only
in tag bits 1..0.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

from . import layout
from .codec import (
    BLOCK_BYTES,
    SUPERBLOCK_MAX_RAW,
    CompressionResult,
    Encoding,
    SizeClass,
    compress_best,
    decompress,
)
from .layout import CompressedBlock, fits
from .policies import make_policy
from .prng import SplitMix64
from .sign import EMPTY, SignatureTables, build_tables, make_signature

MODES = ("baseline", "yacc", "touche", "ideal")
EVICT_MODES = ("random", "largest")

INVALID, UNCOMP, COMP, SUPER, YACC, IDEAL = range(6)
KIND_NAMES = {INVALID: "invalid", UNCOMP: "uncompressed", COMP: "compressed", SUPER: "superblock", YACC: "yacc", IDEAL: "ideal"}

MiB = 1 << 20


class CacheError(Exception):
    pass


@dataclass(frozen=True)
class CacheGeometry:
    capacity_bytes: int = 4 * MiB
    ways: int = 8
    line_bytes: int = BLOCK_BYTES

    def __post_init__(self):
        if self.line_bytes != BLOCK_BYTES:
            raise ValueError("line size is fixed at 64 bytes")
        lines, rem = divmod(self.capacity_bytes, self.line_bytes)
        if rem or self.ways < 1 or lines % self.ways:
            raise ValueError(f"capacity {self.capacity_bytes} is not a whole number of {self.ways}-way sets")
        sets = lines // self.ways
        if sets & (sets - 1):
            raise ValueError("set count must be a power of two")

    @property
    def sets(self) -> int:
        return self.capacity_bytes // (self.ways * self.line_bytes)

    @functools.cached_property
    def set_index_bits(self) -> int:
        return self.sets.bit_length() - 1

    @property
    def tag_bits(self) -> int:
        return layout.TAG_BITS

    @property
    def address_bits(self) -> int:
        """Physical address width that yields exactly 29 tag bits (48 at 4 MiB, 8-way)."""
        return 6 + self.set_index_bits + self.tag_bits

    def split(self, addr: int) -> tuple[int, int]:
        idx = self.set_index_bits
        if addr < 0 or addr >> (35 + idx):
            raise CacheError(f"address {addr:#x} exceeds {self.address_bits} bits for this geometry")
        return (addr >> 8) & ((1 << idx) - 1), ((addr >> (8 + idx)) << 2) | ((addr >> 6) & 3)

    def join(self, set_index: int, tag: int) -> int:
        return ((tag >> 2) << (8 + self.set_index_bits)) | (set_index << 8) | ((tag & 3) << 6)


@dataclass(slots=True)
class Eviction:
    addr: int
    tag: int
    dirty: bool
    data: bytes


@dataclass(slots=True)
class AccessOutcome:
    hit: bool = False
    compressed_hit: bool = False
    ways_probed: int = 0
    data_arrays_read: int = 0
    signature_collisions: int = 0
    marker_collisions: int = 0
    evicted: list = field(default_factory=list)
    fill_performed: bool = False
    data: bytes | None = None
    installed_class: SizeClass | None = None
    compressed_install: bool = False

    @property
    def kind(self) -> str:
        return "hit" if self.hit else "miss"


class Way:
    __slots__ = ("kind", "blocks", "field", "dirty", "group", "yclass")

    def __init__(self):
        self.reset()

    def reset(self):
        self.kind = INVALID
        self.blocks: dict[int, CompressedBlock] = {}
        self.field = 0
        self.dirty = False
        self.group = -1
        self.yclass = None


def _block(tag, cls, result, dirty=False) -> CompressedBlock:
    return CompressedBlock(tag, cls, result, True, dirty)


class Cache:
    def __init__(
        self,
        mode: str = "touche",
        geometry: CacheGeometry | None = None,
        policy: str = "lru",
        seed: int = 0,
        evict_within_line: str = "random",
        ideal_arbitrary4: bool = False,
        tables: SignatureTables | None = None,
        marker: int | None = None,
        check: bool = False,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if evict_within_line not in EVICT_MODES:
            raise ValueError(f"unknown within-line eviction {evict_within_line!r}")
        self.mode = mode
        self.geometry = geometry or CacheGeometry()
        self.seed = seed
        self.rng = SplitMix64(seed)
        # tables and marker are drawn in every mode so that all modes see the
        # same random stream afterwards
        tables_seed = self.rng.next()
        drawn_marker = self.rng.next() & 0xFFFF
        self.tables = tables if tables is not None else build_tables(tables_seed)
        self.marker = drawn_marker if marker is None else marker & 0xFFFF
        g = self.geometry
        self.policy = make_policy(policy, g.sets, g.ways, self.rng)
        self.evict_within_line = evict_within_line
        self.ideal_limit = 4 if ideal_arbitrary4 else 3
        self.check = check
        self.sets = [[Way() for _ in range(g.ways)] for _ in range(g.sets)]
        self.resident = 0
        self.compression_enabled = True
        self.superblock_merges = 0
        self.superblock_conversions = 0
        self.superblock_demotions = 0

    # -- signatures ---------------------------------------------------------

    def signature(self, tag: int) -> int:
        return make_signature(tag, self.tables)

    def superblock_signature(self, tag: int) -> int:
        return make_signature(tag, self.tables, superblock=True)

    # -- lookup -------------------------------------------------------------

    def _lookup(self, s: int, tag: int, out: AccessOutcome) -> int:
        ways = self.sets[s]
        out.ways_probed = len(ways)
        if self.mode != "touche":
            for w, way in enumerate(ways):
                if tag in way.blocks:
                    out.data_arrays_read = 1
                    return w
            return -1

        marker = self.marker
        sig = sbsig = -1
        pos_bit = 1 << (tag & 3)
        candidates = []
        for w, way in enumerate(ways):
            k = way.kind
            if k == UNCOMP:
                if way.field == tag:
                    candidates.append((w, False))
            elif k == COMP or k == SUPER:
                f = way.field
                if f >> 13 == marker:
                    if k == SUPER:
                        if sbsig < 0:
                            sbsig = make_signature(tag, self.tables, True)
                        if (f >> 4) & 0x1FF == sbsig and f & pos_bit:
                            candidates.append((w, False))
                    else:
                        # a compressed entry that reads as a superblock; the
                        # data line has to be read to tell them apart
                        out.marker_collisions += 1
                        candidates.append((w, True))
                else:
                    if sig < 0:
                        sig = make_signature(tag, self.tables)
                    if (f >> 18) & 0x1FF == sig or (f >> 9) & 0x1FF == sig or f & 0x1FF == sig:
                        candidates.append((w, False))
        for w, aliased in candidates:
            out.data_arrays_read += 1
            if tag in ways[w].blocks:
                return w
            if not aliased:
                out.signature_collisions += 1
        return -1

    def probe(self, addr: int) -> AccessOutcome:
        """Tag lookup with no state change (no fill, no replacement update)."""
        s, tag = self.geometry.split(addr)
        out = AccessOutcome()
        w = self._lookup(s, tag, out)
        if w >= 0:
            out.hit = True
            out.compressed_hit = self.sets[s][w].kind != UNCOMP
        return out

    def contains(self, addr: int) -> bool:
        s, tag = self.geometry.split(addr)
        return any(tag in way.blocks for way in self.sets[s])

    def access(self, addr: int, write: bool = False, data: bytes | None = None) -> AccessOutcome:
        if write and (data is None or len(data) != BLOCK_BYTES):
            raise ValueError("a write carries a 64-byte block")
        s, tag = self.geometry.split(addr)
        out = AccessOutcome()
        w = self._lookup(s, tag, out)
        if w < 0:
            self.policy.on_miss(s)
            return out
        way = self.sets[s][w]
        out.hit = True
        out.compressed_hit = way.kind != UNCOMP
        self.policy.on_hit(s, w)
        if write:
            self._write_hit(s, w, tag, bytes(data), out)
        else:
            out.data = decompress(way.blocks[tag].result)
        if self.check:
            self.check_invariants()
        return out

    # -- install ------------------------------------------------------------

    def install(self, addr: int, data: bytes, dirty: bool = False, compress: bool | None = None) -> AccessOutcome:
        s, tag = self.geometry.split(addr)
        if any(tag in way.blocks for way in self.sets[s]):
            raise CacheError(f"install of resident address {addr:#x}")
        out = AccessOutcome(fill_performed=True)
        self._install(s, tag, bytes(data), dirty, self.compression_enabled if compress is None else compress, out)
        if self.check:
            self.check_invariants()
        return out

    def _install(self, s, tag, data, dirty, compress, out):
        cls, res = compress_best(data)
        mode = self.mode
        if mode == "baseline" or not compress or cls is SizeClass.C64:
            self._place_uncompressed(s, tag, data, dirty, out)
        elif mode == "touche":
            self._install_touche(s, tag, cls, res, dirty, out)
        elif mode == "ideal":
            self._install_ideal(s, tag, cls, res, dirty, out)
        elif cls is SizeClass.C16 or cls is SizeClass.C32:
            self._install_yacc(s, tag, cls, res, dirty, out)
        else:
            self._place_uncompressed(s, tag, data, dirty, out)
        self.resident += 1

    def _free_way(self, s) -> int:
        for w, way in enumerate(self.sets[s]):
            if way.kind == INVALID:
                return w
        return -1

    def _place_uncompressed(self, s, tag, data, dirty, out):
        w = self._free_way(s)
        if w < 0:
            w = self.policy.victim(s)
            self._evict_line(s, w, out)
        way = self.sets[s][w]
        way.kind = UNCOMP
        way.blocks = {tag: _block(tag, SizeClass.C64, CompressionResult(Encoding.UNCOMPRESSED, data), dirty)}
        self._refresh(way)
        self.policy.on_insert(s, w)
        out.installed_class = SizeClass.C64
        out.compressed_install = False

    def _place_compressed(self, s, w, block, out, fresh_kind=COMP):
        way = self.sets[s][w]
        if way.kind == INVALID:
            way.kind = fresh_kind
        way.blocks[block.tag] = block
        self._refresh(way)
        out.installed_class = block.size_class
        out.compressed_install = True

    def _install_touche(self, s, tag, cls, res, dirty, out):
        ways = self.sets[s]
        group = tag >> 2
        if res.raw_size_bytes <= SUPERBLOCK_MAX_RAW:
            convertible = -1
            for w, way in enumerate(ways):
                if way.kind == SUPER and way.group == group:
                    way.dirty = way.dirty or dirty
                    self._place_compressed(s, w, _block(tag, SizeClass.C15, res), out)
                    self.superblock_merges += 1
                    self.policy.on_hit(s, w)
                    return
                if convertible < 0 and way.kind == COMP and all(
                    t >> 2 == group and b.result.raw_size_bytes <= SUPERBLOCK_MAX_RAW for t, b in way.blocks.items()
                ):
                    convertible = w
            if convertible >= 0:
                way = ways[convertible]
                way.kind = SUPER
                way.group = group
                way.dirty = dirty or any(b.dirty for b in way.blocks.values())
                way.blocks = {t: _block(t, SizeClass.C15, b.result) for t, b in way.blocks.items()}
                self._place_compressed(s, convertible, _block(tag, SizeClass.C15, res), out)
                self.superblock_merges += 1
                self.superblock_conversions += 1
                self.policy.on_hit(s, convertible)
                return
        block = _block(tag, cls, res, dirty)
        for w, way in enumerate(ways):
            if way.kind == COMP and len(way.blocks) < 3 and fits([b.size_class for b in way.blocks.values()] + [cls]):
                self._place_compressed(s, w, block, out)
                self.policy.on_hit(s, w)
                return
        w = self._free_way(s)
        if w < 0:
            w = self.policy.victim(s)
            way = ways[w]
            if way.kind == COMP:
                while way.blocks and not (len(way.blocks) < 3 and fits([b.size_class for b in way.blocks.values()] + [cls])):
                    self.evict_block_within_line(s, w, out)
            else:
                self._evict_line(s, w, out)
        self._place_compressed(s, w, block, out)
        self.policy.on_insert(s, w)

    def _ideal_can_hold(self, blocks) -> bool:
        if len(blocks) <= self.ideal_limit and sum(int(b.size_class) for b in blocks) <= BLOCK_BYTES:
            return True
        if len(blocks) <= 4:
            group = blocks[0].tag >> 2
            return all(b.tag >> 2 == group and b.result.raw_size_bytes <= 16 for b in blocks)
        return False

    def _ideal_superblock(self, way) -> bool:
        """A full same-group line of small blocks goes as a unit, like a superblock."""
        blocks = list(way.blocks.values())
        return len(blocks) > self.ideal_limit and len({b.tag >> 2 for b in blocks}) == 1

    def _install_ideal(self, s, tag, cls, res, dirty, out):
        ways = self.sets[s]
        block = _block(tag, cls, res, dirty)
        group = tag >> 2
        small = res.raw_size_bytes <= 16
        if small:
            for w, way in enumerate(ways):
                if way.kind == IDEAL and all(t >> 2 == group for t in way.blocks) and self._ideal_can_hold(list(way.blocks.values()) + [block]):
                    self._place_compressed(s, w, block, out)
                    self.policy.on_hit(s, w)
                    return
            # keep a free way for the rest of the group rather than mixing groups
            w = self._free_way(s)
            if w >= 0:
                self._place_compressed(s, w, block, out, fresh_kind=IDEAL)
                self.policy.on_insert(s, w)
                return
        for w, way in enumerate(ways):
            if way.kind == IDEAL and self._ideal_can_hold(list(way.blocks.values()) + [block]):
                self._place_compressed(s, w, block, out)
                self.policy.on_hit(s, w)
                return
        w = self._free_way(s)
        if w < 0:
            w = self.policy.victim(s)
            way = ways[w]
            if way.kind == IDEAL and not self._ideal_superblock(way):
                while way.blocks and not self._ideal_can_hold(list(way.blocks.values()) + [block]):
                    self.evict_block_within_line(s, w, out)
            else:
                self._evict_line(s, w, out)
        self._place_compressed(s, w, block, out, fresh_kind=IDEAL)
        self.policy.on_insert(s, w)

    def _install_yacc(self, s, tag, cls, res, dirty, out):
        ways = self.sets[s]
        group = tag >> 2
        cap = BLOCK_BYTES // int(cls)
        block = _block(tag, cls, res, dirty)
        for w, way in enumerate(ways):
            if way.kind == YACC and way.group == group and way.yclass is cls and len(way.blocks) < cap:
                self._place_compressed(s, w, block, out)
                self.superblock_merges += 1
                self.policy.on_hit(s, w)
                return
        w = self._free_way(s)
        if w < 0:
            w = self.policy.victim(s)
            self._evict_line(s, w, out)
        way = ways[w]
        way.kind = YACC
        way.group = group
        way.yclass = cls
        self._place_compressed(s, w, block, out)
        self.policy.on_insert(s, w)

    # -- writes -------------------------------------------------------------

    def _write_hit(self, s, w, tag, data, out):
        way = self.sets[s][w]
        k = way.kind
        if k == UNCOMP:
            way.blocks[tag] = _block(tag, SizeClass.C64, CompressionResult(Encoding.UNCOMPRESSED, data), True)
            self._refresh(way)
            return
        cls, res = compress_best(data, superblock_target=(k == SUPER))
        others = [b for t, b in way.blocks.items() if t != tag]
        if k == SUPER:
            ok = cls is SizeClass.C15
        elif k == COMP:
            ok = cls is not SizeClass.C64 and fits([b.size_class for b in others] + [cls])
        elif k == IDEAL:
            ok = cls is not SizeClass.C64 and self._ideal_can_hold(others + [_block(tag, cls, res)])
        else:
            ok = cls is way.yclass
        if ok:
            way.blocks[tag] = _block(tag, cls, res, True)
            if k == SUPER:
                way.dirty = True
            self._refresh(way)
            return
        # no longer fits where it lives: drop the stale copy and reinstall dirty
        del way.blocks[tag]
        self.resident -= 1
        if way.blocks:
            if k == SUPER:
                self.superblock_demotions += 1
            self._refresh(way)
        else:
            way.reset()
        self._install(s, tag, data, True, self.compression_enabled, out)

    # -- eviction -----------------------------------------------------------

    def _remove(self, s, w, tag, out) -> CompressedBlock:
        way = self.sets[s][w]
        blk = way.blocks.pop(tag)
        dirty = blk.dirty or (way.kind == SUPER and way.dirty)
        out.evicted.append(Eviction(self.geometry.join(s, tag), tag, dirty, decompress(blk.result)))
        self.resident -= 1
        if way.blocks:
            if way.kind == SUPER:
                self.superblock_demotions += 1
            self._refresh(way)
        else:
            way.reset()
        return blk

    def _evict_line(self, s, w, out):
        way = self.sets[s][w]
        for tag in list(way.blocks):
            self._remove(s, w, tag, out)
        way.reset()

    def evict_block_within_line(self, s: int, w: int, out: AccessOutcome | None = None) -> CompressedBlock:
        way = self.sets[s][w]
        if not way.blocks:
            raise CacheError("no valid block to evict")
        tags = sorted(way.blocks) if way.kind == SUPER else list(way.blocks)
        if self.evict_within_line == "largest":
            victim = max(tags, key=lambda t: (int(way.blocks[t].size_class), -tags.index(t)))
        else:
            victim = tags[self.rng.randbelow(len(tags))]
        return self._remove(s, w, victim, out if out is not None else AccessOutcome())

    def select_victim(self, s: int) -> int:
        return self.policy.victim(s)

    # -- tag-array fields ---------------------------------------------------

    def _refresh(self, way: Way):
        k = way.kind
        if k == UNCOMP:
            way.field = next(iter(way.blocks))
        elif k == COMP:
            slots = [make_signature(t, self.tables) for t in way.blocks] + [EMPTY] * (3 - len(way.blocks))
            way.field = layout.compressed_field(slots, any(b.dirty for b in way.blocks.values()))
        elif k == SUPER:
            valid = 0
            for t in way.blocks:
                valid |= 1 << (t & 3)
            way.field = layout.superblock_field(self.marker, make_signature(way.group << 2, self.tables, True), valid)

    def tag_entry(self, s: int, w: int) -> int | None:
        """31-bit tag-array word for a way; None in modes without one (yacc, ideal)."""
        way = self.sets[s][w]
        if way.kind == INVALID:
            return 0
        if way.kind == UNCOMP:
            blk = next(iter(way.blocks.values()))
            return (1 << 30) | (int(blk.dirty) << 29) | way.field
        if way.kind in (COMP, SUPER):
            return (1 << 29) | way.field
        return None

    def data_line(self, s: int, w: int) -> layout.DataLine | None:
        way = self.sets[s][w]
        if way.kind == UNCOMP:
            return layout.pack_uncompressed(next(iter(way.blocks.values())).result.payload)
        if way.kind == COMP:
            return layout.pack_line(list(way.blocks.values()))
        if way.kind == SUPER:
            first = way.group << 2
            members = [way.blocks.get(first | i) for i in range(4)]
            return layout.pack_superblock(members, first, way.dirty)
        return None

    def effective_capacity(self) -> float:
        g = self.geometry
        return self.resident / (g.sets * g.ways)

    def line_kind_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in KIND_NAMES.values()}
        for ways in self.sets:
            for way in ways:
                counts[KIND_NAMES[way.kind]] += 1
        return counts

    # -- checking and dumps -------------------------------------------------

    def check_invariants(self):
        total = 0
        for s, ways in enumerate(self.sets):
            seen = set()
            for w, way in enumerate(ways):
                if way.kind == INVALID:
                    if way.blocks:
                        raise CacheError(f"set {s} way {w}: invalid line holds blocks")
                    continue
                if not way.blocks:
                    raise CacheError(f"set {s} way {w}: valid line without blocks")
                for t in way.blocks:
                    if t in seen:
                        raise CacheError(f"set {s}: tag {t:#x} resident twice")
                    seen.add(t)
                total += len(way.blocks)
                if way.kind in (COMP, SUPER, UNCOMP):
                    self._check_encoded(s, w, way)
                elif way.kind == YACC:
                    cap = BLOCK_BYTES // int(way.yclass)
                    if len(way.blocks) > cap or any(t >> 2 != way.group or b.size_class is not way.yclass for t, b in way.blocks.items()):
                        raise CacheError(f"set {s} way {w}: malformed yacc line")
                elif way.kind == IDEAL and not self._ideal_can_hold(list(way.blocks.values())):
                    raise CacheError(f"set {s} way {w}: ideal line over capacity")
        if total != self.resident:
            raise CacheError(f"resident count {self.resident} != {total}")

    def _check_encoded(self, s, w, way):
        entry_bits = self.tag_entry(s, w)
        line = self.data_line(s, w)
        if way.kind == COMP:
            kind = layout.CompressedEntry(layout.slots_from_field(way.field), bool(way.field >> 27 & 1))
        else:
            kind = layout.decode_tag_entry(entry_bits, self.marker)
        if way.kind == SUPER:
            if not isinstance(kind, layout.SuperblockEntry):
                raise CacheError(f"set {s} way {w}: superblock entry does not decode as one")
            if kind.signature != self.superblock_signature(way.group << 2):
                raise CacheError(f"set {s} way {w}: superblock signature mismatch")
        unpacked = layout.unpack_line(line, kind)
        expected = sorted(way.blocks.values(), key=lambda b: b.tag) if way.kind == SUPER else list(way.blocks.values())
        if way.kind == SUPER:
            expected = [CompressedBlock(b.tag, b.size_class, b.result, True, way.dirty) for b in expected]
        if unpacked != expected:
            raise CacheError(f"set {s} way {w}: data line does not round-trip")

    def dump_state(self, fh) -> None:
        """Golden-file dump: one row per valid way.

        ``<set> <way> <kind> <31-bit entry hex | -> <512-bit line hex | -> <codecs>``
        """
        fh.write(layout.GOLDEN_HEADER + "\n")
        g = self.geometry
        fh.write(f"# mode={self.mode} sets={g.sets} ways={g.ways} marker={self.marker:#06x} tables_seed={self.tables.seed:#x}\n")
        for s, ways in enumerate(self.sets):
            for w, way in enumerate(ways):
                if way.kind == INVALID:
                    continue
                entry = self.tag_entry(s, w)
                line = self.data_line(s, w)
                entry_hex = "-" if entry is None else layout.format_entry_hex(entry)
                if line is None:
                    line_hex = "-"
                    codecs = ",".join(f"{t:#x}:{b.result.encoding.value}" for t, b in way.blocks.items())
                else:
                    line_hex = line.hex()
                    codecs = ",".join("-" if c is None else c.value for c in line.codecs)
                fh.write(f"{s} {w} {KIND_NAMES[way.kind]} {entry_hex} {line_hex} {codecs}\n")
