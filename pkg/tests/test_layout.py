import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from touchesim.codec import CompressionResult, Encoding, SizeClass, compress_best
from touchesim.layout import (
    CompressedBlock,
    CompressedEntry,
    DataLine,
    InvalidEntry,
    LayoutError,
    SuperblockEntry,
    UncompressedEntry,
    decode_record,
    decode_tag_entry,
    encode_record,
    encode_tag_entry,
    fits,
    fits_superblock,
    format_entry_hex,
    format_line_hex,
    pack_line,
    pack_superblock,
    parse_hex,
    record_shift,
    tag_area_bits,
    unpack_line,
)
from touchesim.sign import EMPTY

C15, C16, C32, C48, C64 = SizeClass.C15, SizeClass.C16, SizeClass.C32, SizeClass.C48, SizeClass.C64
MARKER = 0xA5C3


@pytest.mark.parametrize("classes,ok", [
    ([C16, C16, C16], True), ([C32, C16], True), ([C16, C32], True), ([C48], True), ([C32], True),
    ([C16, C16], True), ([C16], True), ([C32, C32], False), ([C48, C16], False), ([C16, C48], False),
    ([C32, C16, C16], False), ([C64], False), ([C16] * 4, False), ([], False),
])
def test_fits_table(classes, ok):
    assert fits(classes) is ok


def test_fits_superblock():
    assert fits_superblock([C15] * 4)
    assert fits_superblock([C15, None, None, None])
    assert not fits_superblock([C15, C16, C15, C15])
    assert not fits_superblock([None] * 4)


def test_tag_area():
    assert [tag_area_bits(m) for m in ("baseline", "yacc", "touche", "ideal")] == [31, 46, 31, 127]


def test_entry_examples():
    tag = 0x1ABCDEF0 & 0x1FFFFFFF
    assert encode_tag_entry(UncompressedEntry(tag)) == (1 << 30) | tag
    bits = encode_tag_entry(CompressedEntry((5, EMPTY, EMPTY)))
    assert bits == (0 << 30) | (1 << 29) | (1 << 28) | (5 << 18)
    assert encode_tag_entry(InvalidEntry()) == 0
    assert decode_tag_entry(0, MARKER) == InvalidEntry()


def test_decode_table_one():
    assert isinstance(decode_tag_entry((1 << 30) | (1 << 29) | 7, MARKER), UncompressedEntry)
    assert decode_tag_entry((1 << 30) | (1 << 29) | 7, MARKER).dirty
    sb = encode_tag_entry(SuperblockEntry(MARKER, 0x55, 0b1011))
    assert decode_tag_entry(sb, MARKER) == SuperblockEntry(MARKER, 0x55, 0b1011)
    # compressed-form field with bit 28 clear that is not the marker is corrupt
    with pytest.raises(LayoutError):
        decode_tag_entry((1 << 29) | 0x1234, MARKER)
    with pytest.raises(LayoutError):
        decode_tag_entry(1 << 31, MARKER)


entries = st.one_of(
    st.just(InvalidEntry()),
    st.builds(UncompressedEntry, st.integers(0, (1 << 29) - 1), st.booleans()),
    st.builds(CompressedEntry, st.tuples(*[st.integers(0, 511)] * 3), st.booleans()),
    st.builds(lambda sig, v: SuperblockEntry(MARKER, sig, v), st.integers(1, 511), st.integers(1, 15)),
)


@settings(max_examples=2000)
@given(entries)
def test_entry_roundtrip(e):
    assert decode_tag_entry(encode_tag_entry(e), MARKER) == e


@given(st.integers(0, (1 << 31) - 1))
def test_decode_never_crashes(bits):
    try:
        decode_tag_entry(bits, MARKER)
    except LayoutError:
        pass


def test_records():
    r = encode_record(0x1FFFFFFF, True, False, C32)
    assert r >> 34 == 0 and decode_record(r) == (0x1FFFFFFF, True, False, C32)
    for bad in (5, 6, 7):
        with pytest.raises(LayoutError):
            decode_record(bad)
    assert [record_shift(k) for k in range(3)] == [478, 444, 410]


def _blk(tag, data, cls=None, dirty=False, sb=False):
    c, r = compress_best(data, superblock_target=sb)
    return CompressedBlock(tag, cls or c, r, True, dirty)


def test_single_c16_layout():
    b = _blk(0x0ABCDEF, bytes(64))
    line = pack_line([b])
    assert line.bits & ((1 << 128) - 1) == 0  # zeros payload is a single 0x00 byte
    rec = line.bits >> 478
    assert rec == encode_record(0x0ABCDEF, True, False, C16)
    assert unpack_line(line, CompressedEntry((9, EMPTY, EMPTY))) == [b]


def test_three_c16_records():
    blks = [_blk(t, bytes(64)) for t in (1, 2, 3)]
    line = pack_line(blks)
    for k, t in enumerate((1, 2, 3)):
        assert (line.bits >> (478 - 34 * k)) & ((1 << 34) - 1) == encode_record(t, True, False, C16)
    assert unpack_line(line, CompressedEntry((4, 5, 6))) == blks


def test_overflow_rejected():
    big = _blk(1, bytes(range(64)))
    with pytest.raises(LayoutError):
        pack_line([CompressedBlock(1, C32, big.result), CompressedBlock(2, C32, big.result)])


def test_superblock_mask():
    members = [_blk(0x40 | i, bytes(64), sb=True) for i in range(4)]
    members[2] = None
    line = pack_superblock(members, 0x40, dirty=True)
    got = unpack_line(line, SuperblockEntry(MARKER, 3, 0b1011))
    assert [b.tag for b in got] == [0x40, 0x41, 0x43]
    assert all(b.dirty and b.size_class is C15 for b in got)
    assert line.bits >> 483 == 0x40 and line.bits >> 482 & 1


def test_slot_count_disagreement_is_corruption():
    line = pack_line([_blk(1, bytes(64)), _blk(2, bytes(64))])
    with pytest.raises(LayoutError):
        unpack_line(line, CompressedEntry((4, EMPTY, EMPTY)))
    with pytest.raises(LayoutError):
        unpack_line(line, CompressedEntry((4, 5, 6)))


def _payload_block(rng, cls):
    """A random block that compresses into exactly ``cls``."""
    d = {C16: 1, C32: 2, C48: 4}[cls]
    lim = 1 << (8 * d - 1)
    base = rng.getrandbits(64) | (1 << 63) | (1 << 40)
    deltas = [0, lim - 1] + [rng.randrange(-lim, lim) for _ in range(6)]
    return b"".join(((base + x) % (1 << 64)).to_bytes(8, "little") for x in deltas)


FIT_SETS = [[C16, C16, C16], [C32, C16], [C16, C32], [C48], [C32], [C16, C16], [C16]]


@settings(max_examples=500, deadline=None)
@given(st.sampled_from(FIT_SETS), st.randoms(use_true_random=False), st.lists(st.booleans(), min_size=3, max_size=3))
def test_pack_unpack_roundtrip(classes, rng, dirties):
    blks = []
    for k, cls in enumerate(classes):
        data = _payload_block(rng, cls)
        c, r = compress_best(data)
        assert c is cls
        blks.append(CompressedBlock(rng.getrandbits(29), c, r, True, dirties[k]))
    line = pack_line(blks)
    assert line.bits >> 512 == 0
    slots = tuple([7] * len(blks) + [EMPTY] * (3 - len(blks)))
    assert unpack_line(line, CompressedEntry(slots)) == blks


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(0, 511))
def test_trailer_isolation(rng, bit):
    blks = [CompressedBlock(rng.getrandbits(29), C16, compress_best(_payload_block(rng, C16))[1]) for _ in range(3)]
    line = pack_line(blks)
    mutated = DataLine(line.bits ^ (1 << bit), line.codecs)
    try:
        got = unpack_line(mutated, CompressedEntry((1, 2, 3)))
    except LayoutError:
        return
    if bit >= record_shift(2):
        assert [b.result for b in got] == [b.result for b in blks]
    else:
        assert [b.tag for b in got] == [b.tag for b in blks]


def test_hex_formats():
    assert format_entry_hex((1 << 30) | 5) == "40000005"
    assert len(format_line_hex(1 << 511)) == 128
    assert parse_hex(format_line_hex(12345), 512) == 12345
    with pytest.raises(ValueError):
        parse_hex("1" * 129, 512)
