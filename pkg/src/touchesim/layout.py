"""Bit-level encodings of tag-array entries and 512-bit data lines.

Tag entry (31 bits): bit 30 valid, bit 29 dirty, bits 28..0 the tag field.

    (valid, dirty) = (0, 0)  invalid line
                     (1, x)  uncompressed, field is the 29-bit tag
                     (0, 1)  compressed forms:
        superblock  field[28:13] == boot marker, field[12:4] signature,
                    field[3:0] per-neighbor valid bits
        compressed  field[28] = 1 (line valid), field[27] line dirty,
                    field[26:0] three 9-bit signature slots, slot 0 highest

Data line (512 bits, bit 0 = LSB):

    compressed  payload k packed upward from bit 0 in slot order; 34-bit
                trailer record k at bits [477-34k, 511-34k]
    superblock  neighbor i payload in bits [120i, 120i+119]; line dirty at
                bit 482; 29-bit tag of neighbor 0 at bits [483, 511]
    uncompressed  the 64 data bytes, byte j at bits [8j, 8j+7]

Trailer record (34 bits, MSB first): tag(29) valid(1) dirty(1) comp(3).
The codec used for each payload is kept beside the 512-bit image; the 3-bit
comp field only has room for the size class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .codec import (
    BLOCK_BYTES,
    CodecError,
    CompressionResult,
    Encoding,
    SizeClass,
    payload_length,
)
from .sign import EMPTY, SIG_MASK

LINE_BITS = 512
TAG_BITS = 29
TAG_MASK = (1 << TAG_BITS) - 1
ENTRY_BITS = TAG_BITS + 2
RECORD_BITS = TAG_BITS + 5
MAX_COMPRESSED_SLOTS = 3
SUPERBLOCK_BLOCKS = 4
SUPERBLOCK_REGION_BITS = 120
SUPERBLOCK_DIRTY_BIT = 482
SUPERBLOCK_TAG_SHIFT = LINE_BITS - TAG_BITS
MARKER_BITS = 16
MARKER_SHIFT = TAG_BITS - MARKER_BITS

COMP_CODES = {
    SizeClass.C64: 0,
    SizeClass.C16: 1,
    SizeClass.C32: 2,
    SizeClass.C48: 3,
    SizeClass.C15: 4,
}
COMP_CLASSES = {v: k for k, v in COMP_CODES.items()}


class LayoutError(ValueError):
    """Corrupt tag entry or data line."""


# -- tag entries --------------------------------------------------------------


@dataclass(frozen=True)
class InvalidEntry:
    pass


@dataclass(frozen=True)
class UncompressedEntry:
    tag: int
    dirty: bool = False


@dataclass(frozen=True)
class CompressedEntry:
    slots: tuple[int, int, int] = (EMPTY, EMPTY, EMPTY)
    line_dirty: bool = False
    line_valid: bool = True

    @property
    def occupied(self) -> int:
        return sum(1 for s in self.slots if s != EMPTY)


@dataclass(frozen=True)
class SuperblockEntry:
    marker: int
    signature: int
    block_valid: int

    def present(self) -> list[int]:
        return [i for i in range(SUPERBLOCK_BLOCKS) if self.block_valid >> i & 1]


TagEntry = InvalidEntry | UncompressedEntry | CompressedEntry | SuperblockEntry


def compressed_field(slots, line_dirty: bool) -> int:
    s0, s1, s2 = slots
    return (1 << 28) | (int(line_dirty) << 27) | (s0 << 18) | (s1 << 9) | s2


def slots_from_field(fld: int) -> tuple[int, int, int]:
    return (fld >> 18) & SIG_MASK, (fld >> 9) & SIG_MASK, fld & SIG_MASK


def superblock_field(marker: int, signature: int, block_valid: int) -> int:
    return (marker << MARKER_SHIFT) | (signature << 4) | block_valid


def encode_tag_entry(entry: TagEntry) -> int:
    if isinstance(entry, InvalidEntry):
        return 0
    if isinstance(entry, UncompressedEntry):
        if entry.tag >> TAG_BITS or entry.tag < 0:
            raise LayoutError(f"tag {entry.tag:#x} exceeds {TAG_BITS} bits")
        return (1 << 30) | (int(entry.dirty) << 29) | entry.tag
    if isinstance(entry, CompressedEntry):
        if not entry.line_valid:
            raise LayoutError("compressed entries carry line_valid = 1")
        if any(s < 0 or s > SIG_MASK for s in entry.slots):
            raise LayoutError("signature slot out of range")
        return (1 << 29) | compressed_field(entry.slots, entry.line_dirty)
    if isinstance(entry, SuperblockEntry):
        if entry.marker >> MARKER_BITS or entry.signature > SIG_MASK or entry.block_valid >> 4:
            raise LayoutError("superblock field out of range")
        return (1 << 29) | superblock_field(entry.marker, entry.signature, entry.block_valid)
    raise TypeError(f"not a tag entry: {entry!r}")


def decode_tag_entry(bits: int, marker: int) -> TagEntry:
    if bits < 0 or bits >> ENTRY_BITS:
        raise LayoutError(f"tag entry {bits:#x} exceeds {ENTRY_BITS} bits")
    valid, dirty, fld = bits >> 30, (bits >> 29) & 1, bits & TAG_MASK
    if valid:
        return UncompressedEntry(fld, bool(dirty))
    if not dirty:
        if fld:
            raise LayoutError("invalid line with a non-zero tag field")
        return InvalidEntry()
    if fld >> MARKER_SHIFT == marker:
        return SuperblockEntry(marker, (fld >> 4) & SIG_MASK, fld & 0xF)
    if not fld >> 28:
        raise LayoutError("compressed entry without its line-valid bit")
    return CompressedEntry(slots_from_field(fld), bool(fld >> 27 & 1))


# -- data lines ---------------------------------------------------------------


@dataclass(frozen=True)
class CompressedBlock:
    tag: int
    size_class: SizeClass
    result: CompressionResult
    valid: bool = True
    dirty: bool = False


@dataclass(frozen=True)
class DataLine:
    bits: int = 0
    codecs: tuple = field(default_factory=tuple)

    def hex(self) -> str:
        return format_line_hex(self.bits)


def fits(classes) -> bool:
    if not 1 <= len(classes) <= MAX_COMPRESSED_SLOTS:
        return False
    return sum(SizeClass(c).bits for c in classes) + RECORD_BITS * len(classes) <= LINE_BITS


def fits_superblock(classes) -> bool:
    present = [c for c in classes if c is not None]
    if len(classes) != SUPERBLOCK_BLOCKS or not present:
        return False
    if any(SizeClass(c) is not SizeClass.C15 for c in present):
        return False
    return SUPERBLOCK_BLOCKS * SUPERBLOCK_REGION_BITS + TAG_BITS + 1 <= LINE_BITS


def encode_record(tag: int, valid: bool, dirty: bool, size_class: SizeClass) -> int:
    return (tag << 5) | (int(valid) << 4) | (int(dirty) << 3) | COMP_CODES[SizeClass(size_class)]


def decode_record(record: int) -> tuple[int, bool, bool, SizeClass]:
    comp = record & 0b111
    if comp not in COMP_CLASSES:
        raise LayoutError(f"reserved compressibility code {comp}")
    return record >> 5, bool(record >> 4 & 1), bool(record >> 3 & 1), COMP_CLASSES[comp]


def record_shift(k: int) -> int:
    return LINE_BITS - RECORD_BITS * (k + 1)


def pack_line(blocks) -> DataLine:
    classes = [b.size_class for b in blocks]
    if not fits(classes):
        raise LayoutError(f"blocks of classes {[int(c) for c in classes]} overflow a 512-bit line")
    bits = 0
    pos = 0
    for k, b in enumerate(blocks):
        if len(b.result.payload) > b.size_class.bytes:
            raise LayoutError(f"payload of {len(b.result.payload)} B exceeds class {int(b.size_class)}")
        bits |= int.from_bytes(b.result.payload, "little") << pos
        pos += b.size_class.bits
        bits |= encode_record(b.tag, b.valid, b.dirty, b.size_class) << record_shift(k)
    return DataLine(bits, tuple(b.result.encoding for b in blocks))


def _region(bits: int, pos: int, nbytes: int) -> bytes:
    return ((bits >> pos) & ((1 << (nbytes * 8)) - 1)).to_bytes(nbytes, "little")


def _result_from_region(encoding: Encoding, region: bytes) -> CompressionResult:
    try:
        n = payload_length(encoding, region)
    except CodecError as exc:
        raise LayoutError(str(exc)) from exc
    if any(region[n:]):
        raise LayoutError("non-zero bits after a payload")
    return CompressionResult(encoding, region[:n])


def pack_superblock(members, first_tag: int, dirty: bool) -> DataLine:
    """``members`` is a 4-list indexed by neighbor position, None where absent."""
    if not fits_superblock([None if m is None else m.size_class for m in members]):
        raise LayoutError("superblock members must all be C15")
    if first_tag & 0b11:
        raise LayoutError("superblock tag must name neighbor 0")
    bits = (first_tag << SUPERBLOCK_TAG_SHIFT) | (int(dirty) << SUPERBLOCK_DIRTY_BIT)
    codecs = []
    for i, m in enumerate(members):
        if m is None:
            codecs.append(None)
            continue
        if m.tag != first_tag | i:
            raise LayoutError(f"member {i} has tag {m.tag:#x}, expected {first_tag | i:#x}")
        bits |= int.from_bytes(m.result.payload, "little") << (SUPERBLOCK_REGION_BITS * i)
        codecs.append(m.result.encoding)
    return DataLine(bits, tuple(codecs))


def pack_uncompressed(data: bytes) -> DataLine:
    if len(data) != BLOCK_BYTES:
        raise LayoutError("uncompressed line needs 64 bytes")
    return DataLine(int.from_bytes(data, "little"), (Encoding.UNCOMPRESSED,))


def unpack_line(line: DataLine, kind: TagEntry) -> list[CompressedBlock]:
    bits = line.bits
    if bits < 0 or bits >> LINE_BITS:
        raise LayoutError("data line exceeds 512 bits")
    if isinstance(kind, CompressedEntry):
        n = kind.occupied
        if kind.slots[:n].count(EMPTY) or len(line.codecs) != n:
            raise LayoutError("signature slots disagree with the line's block count")
        out = []
        pos = 0
        for k in range(n):
            tag, valid, dirty, cls = decode_record((bits >> record_shift(k)) & ((1 << RECORD_BITS) - 1))
            if cls is SizeClass.C15:
                raise LayoutError("C15 payload outside a superblock")
            if pos + cls.bits > record_shift(n - 1):
                raise LayoutError("payloads overlap the trailer")
            out.append(CompressedBlock(tag, cls, _result_from_region(line.codecs[k], _region(bits, pos, cls.bytes)), valid, dirty))
            pos += cls.bits
        if bits & (((1 << record_shift(n - 1)) - 1) ^ ((1 << pos) - 1)):
            raise LayoutError("non-zero bits between payloads and trailer")
        return out
    if isinstance(kind, SuperblockEntry):
        if len(line.codecs) != SUPERBLOCK_BLOCKS:
            raise LayoutError("superblock line needs four codec slots")
        first = bits >> SUPERBLOCK_TAG_SHIFT
        dirty = bool(bits >> SUPERBLOCK_DIRTY_BIT & 1)
        out = []
        for i in range(SUPERBLOCK_BLOCKS):
            region = _region(bits, SUPERBLOCK_REGION_BITS * i, SizeClass.C15.bytes)
            if not kind.block_valid >> i & 1:
                if any(region) or line.codecs[i] is not None:
                    raise LayoutError(f"absent neighbor {i} holds data")
                continue
            if line.codecs[i] is None:
                raise LayoutError(f"present neighbor {i} has no codec")
            out.append(CompressedBlock(first | i, SizeClass.C15, _result_from_region(line.codecs[i], region), True, dirty))
        return out
    if isinstance(kind, UncompressedEntry):
        return [CompressedBlock(kind.tag, SizeClass.C64, CompressionResult(Encoding.UNCOMPRESSED, bits.to_bytes(64, "little")), True, kind.dirty)]
    raise LayoutError(f"cannot unpack a line described by {kind!r}")


# -- area accounting ----------------------------------------------------------

TAG_AREA_BITS = {"baseline": 31, "yacc": 46, "touche": 31, "ideal": 127}
# area multipliers quoted alongside the raw bit ratios; they fold in
# replacement and state bits whose widths are not given
NOMINAL_AREA_RATIO = {"baseline": 1.0, "yacc": 1.35, "touche": 1.0, "ideal": 3.7}


def tag_area_bits(mode: str) -> int:
    try:
        return TAG_AREA_BITS[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}") from None


# -- golden hex format --------------------------------------------------------

GOLDEN_HEADER = "#%touchesim-state 1"


def format_entry_hex(bits: int) -> str:
    return f"{bits:08x}"


def format_line_hex(bits: int) -> str:
    return f"{bits:0128x}"


def parse_hex(text: str, nbits: int) -> int:
    value = int(text, 16)
    if value >> nbits:
        raise LayoutError(f"{text!r} exceeds {nbits} bits")
    return value
