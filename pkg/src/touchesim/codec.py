"""BDI and FPC block codecs plus size-class quantization.

All multi-byte BDI bases and deltas are little-endian. FPC splits the block
into sixteen little-endian 32-bit words and emits, per word, a 3-bit prefix
followed by the pattern's residue bits, packed MSB-first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

BLOCK_BYTES = 64
SUPERBLOCK_MAX_RAW = 15


class CodecError(ValueError):
    """Payload does not match its encoding's grammar."""


class Encoding(str, enum.Enum):
    UNCOMPRESSED = "uncompressed"
    BDI_ZEROS = "bdi-zeros"
    BDI_REP = "bdi-rep"
    BDI_B8D1 = "bdi-b8d1"
    BDI_B8D2 = "bdi-b8d2"
    BDI_B8D4 = "bdi-b8d4"
    BDI_B4D1 = "bdi-b4d1"
    BDI_B4D2 = "bdi-b4d2"
    BDI_B2D1 = "bdi-b2d1"
    FPC = "fpc"


class SizeClass(enum.IntEnum):
    C15 = 15
    C16 = 16
    C32 = 32
    C48 = 48
    C64 = 64

    @property
    def bytes(self) -> int:
        return int(self)

    @property
    def bits(self) -> int:
        return int(self) * 8


@dataclass(frozen=True, slots=True)
class CompressionResult:
    encoding: Encoding
    payload: bytes

    @property
    def raw_size_bytes(self) -> int:
        return len(self.payload)


# (base bytes, delta bytes), ordered by resulting payload size
_BASE_DELTA = {
    Encoding.BDI_B8D1: (8, 1),
    Encoding.BDI_B4D1: (4, 1),
    Encoding.BDI_B8D2: (8, 2),
    Encoding.BDI_B2D1: (2, 1),
    Encoding.BDI_B4D2: (4, 2),
    Encoding.BDI_B8D4: (8, 4),
}


def bdi_payload_size(encoding: Encoding) -> int | None:
    """Fixed payload length of a BDI encoding, None for variable-length ones."""
    if encoding is Encoding.BDI_ZEROS:
        return 1
    if encoding is Encoding.BDI_REP:
        return 8
    if encoding in _BASE_DELTA:
        base, delta = _BASE_DELTA[encoding]
        return base + (BLOCK_BYTES // base) * delta
    if encoding is Encoding.UNCOMPRESSED:
        return BLOCK_BYTES
    return None


def _check_block(block: bytes) -> bytes:
    block = bytes(block)
    if len(block) != BLOCK_BYTES:
        raise ValueError(f"block must be {BLOCK_BYTES} bytes, got {len(block)}")
    return block


def uncompressed(block: bytes) -> CompressionResult:
    return CompressionResult(Encoding.UNCOMPRESSED, _check_block(block))


def _base_delta(block: bytes, base_bytes: int, delta_bytes: int) -> bytes | None:
    mod = 1 << (8 * base_bytes)
    half_mod = mod >> 1
    lim = 1 << (8 * delta_bytes - 1)
    values = [
        int.from_bytes(block[i : i + base_bytes], "little")
        for i in range(0, BLOCK_BYTES, base_bytes)
    ]
    base = values[0]
    out = [base.to_bytes(base_bytes, "little")]
    for v in values:
        d = (v - base) % mod
        if d >= half_mod:
            d -= mod
        if not -lim <= d < lim:
            return None
        out.append(d.to_bytes(delta_bytes, "little", signed=True))
    return b"".join(out)


def bdi_compress(block: bytes) -> CompressionResult:
    block = _check_block(block)
    if not any(block):
        return CompressionResult(Encoding.BDI_ZEROS, b"\x00")
    if block[:8] * 8 == block:
        return CompressionResult(Encoding.BDI_REP, block[:8])
    for enc, (b, d) in _BASE_DELTA.items():
        payload = _base_delta(block, b, d)
        if payload is not None:
            return CompressionResult(enc, payload)
    return CompressionResult(Encoding.UNCOMPRESSED, block)


def _bdi_decompress(result: CompressionResult) -> bytes:
    enc, payload = result.encoding, result.payload
    expected = bdi_payload_size(enc)
    if len(payload) != expected:
        raise CodecError(f"{enc.value}: payload is {len(payload)} bytes, expected {expected}")
    if enc is Encoding.UNCOMPRESSED:
        return payload
    if enc is Encoding.BDI_ZEROS:
        if payload != b"\x00":
            raise CodecError("bdi-zeros payload must be a single zero byte")
        return bytes(BLOCK_BYTES)
    if enc is Encoding.BDI_REP:
        return payload * 8
    base_bytes, delta_bytes = _BASE_DELTA[enc]
    mod = 1 << (8 * base_bytes)
    base = int.from_bytes(payload[:base_bytes], "little")
    out = []
    for i in range(base_bytes, len(payload), delta_bytes):
        d = int.from_bytes(payload[i : i + delta_bytes], "little", signed=True)
        out.append(((base + d) % mod).to_bytes(base_bytes, "little"))
    return b"".join(out)


# FPC prefixes
FPC_ZERO = 0b000
FPC_SE4 = 0b001
FPC_SE8 = 0b010
FPC_SE16 = 0b011
FPC_HALF_PADDED = 0b100
FPC_TWO_SE8 = 0b101
FPC_REP_BYTES = 0b110
FPC_RAW = 0b111

FPC_DATA_BITS = {
    FPC_ZERO: 0,
    FPC_SE4: 4,
    FPC_SE8: 8,
    FPC_SE16: 16,
    FPC_HALF_PADDED: 16,
    FPC_TWO_SE8: 16,
    FPC_REP_BYTES: 8,
    FPC_RAW: 32,
}
WORDS_PER_BLOCK = BLOCK_BYTES // 4


def _se_byte(h: int) -> bool:
    """16-bit halfword that is a sign-extended byte."""
    return h < 0x80 or h >= 0xFF80


def _fpc_word(w: int) -> tuple[int, int]:
    if w == 0:
        return FPC_ZERO, 0
    s = w - (1 << 32) if w & 0x80000000 else w
    if -8 <= s < 8:
        return FPC_SE4, s & 0xF
    if -128 <= s < 128:
        return FPC_SE8, s & 0xFF
    if w == (w & 0xFF) * 0x01010101:
        return FPC_REP_BYTES, w & 0xFF
    if -32768 <= s < 32768:
        return FPC_SE16, s & 0xFFFF
    if w & 0xFFFF == 0:
        return FPC_HALF_PADDED, w >> 16
    hi, lo = w >> 16, w & 0xFFFF
    if _se_byte(hi) and _se_byte(lo):
        return FPC_TWO_SE8, ((hi & 0xFF) << 8) | (lo & 0xFF)
    return FPC_RAW, w


def _sign_extend(v: int, bits: int, width: int) -> int:
    if v & (1 << (bits - 1)):
        v -= 1 << bits
    return v & ((1 << width) - 1)


def _fpc_unword(prefix: int, data: int) -> int:
    if prefix == FPC_ZERO:
        return 0
    if prefix == FPC_SE4:
        return _sign_extend(data, 4, 32)
    if prefix == FPC_SE8:
        return _sign_extend(data, 8, 32)
    if prefix == FPC_SE16:
        return _sign_extend(data, 16, 32)
    if prefix == FPC_HALF_PADDED:
        return data << 16
    if prefix == FPC_TWO_SE8:
        return (_sign_extend(data >> 8, 8, 16) << 16) | _sign_extend(data & 0xFF, 8, 16)
    if prefix == FPC_REP_BYTES:
        return data * 0x01010101
    return data


def fpc_compress(block: bytes) -> CompressionResult:
    block = _check_block(block)
    acc = 0
    nbits = 0
    for i in range(0, BLOCK_BYTES, 4):
        prefix, data = _fpc_word(int.from_bytes(block[i : i + 4], "little"))
        width = FPC_DATA_BITS[prefix]
        acc = (((acc << 3) | prefix) << width) | data
        nbits += 3 + width
    nbytes = (nbits + 7) // 8
    if nbytes >= BLOCK_BYTES:
        return CompressionResult(Encoding.UNCOMPRESSED, block)
    return CompressionResult(Encoding.FPC, (acc << (nbytes * 8 - nbits)).to_bytes(nbytes, "big"))


def fpc_bit_length(payload: bytes) -> int:
    """Number of meaningful bits in an FPC payload (parses all 16 prefixes)."""
    total = len(payload) * 8
    value = int.from_bytes(payload, "big")
    pos = 0
    for _ in range(WORDS_PER_BLOCK):
        if pos + 3 > total:
            raise CodecError("fpc payload truncated inside a prefix")
        prefix = (value >> (total - pos - 3)) & 0b111
        pos += 3 + FPC_DATA_BITS[prefix]
        if pos > total:
            raise CodecError("fpc payload truncated inside a word")
    return pos


def _fpc_decompress(payload: bytes) -> bytes:
    total = len(payload) * 8
    used = fpc_bit_length(payload)
    if (used + 7) // 8 != len(payload):
        raise CodecError(f"fpc payload is {len(payload)} bytes but encodes {used} bits")
    value = int.from_bytes(payload, "big")
    if value & ((1 << (total - used)) - 1):
        raise CodecError("fpc padding bits are not zero")
    pos = 0
    words = []
    for _ in range(WORDS_PER_BLOCK):
        prefix = (value >> (total - pos - 3)) & 0b111
        pos += 3
        width = FPC_DATA_BITS[prefix]
        data = (value >> (total - pos - width)) & ((1 << width) - 1) if width else 0
        pos += width
        words.append(_fpc_unword(prefix, data).to_bytes(4, "little"))
    return b"".join(words)


def decompress(result: CompressionResult) -> bytes:
    return _decompress(result)


@lru_cache(maxsize=1 << 16)
def _decompress(result: CompressionResult) -> bytes:
    if result.encoding is Encoding.FPC:
        return _fpc_decompress(result.payload)
    return _bdi_decompress(result)


def quantize(raw_size: int, superblock_target: bool = False) -> SizeClass:
    if superblock_target and raw_size <= SUPERBLOCK_MAX_RAW:
        return SizeClass.C15
    for cls in (SizeClass.C16, SizeClass.C32, SizeClass.C48):
        if raw_size <= cls:
            return cls
    return SizeClass.C64


@lru_cache(maxsize=1 << 16)
def _best(block: bytes) -> CompressionResult:
    b = bdi_compress(block)
    f = fpc_compress(block)
    # tie goes to BDI
    return f if f.raw_size_bytes < b.raw_size_bytes else b


def compress_best(block: bytes, superblock_target: bool = False) -> tuple[SizeClass, CompressionResult]:
    """Smaller of BDI and FPC, quantized to a size class.

    Anything that does not fit in 48 bytes is stored uncompressed as C64.
    """
    result = _best(_check_block(block))
    cls = quantize(result.raw_size_bytes, superblock_target)
    if cls is SizeClass.C64 and result.encoding is not Encoding.UNCOMPRESSED:
        result = CompressionResult(Encoding.UNCOMPRESSED, bytes(block))
    return cls, result


def payload_length(encoding: Encoding, region: bytes) -> int:
    """Length of the raw payload at the start of a zero-padded storage region."""
    fixed = bdi_payload_size(encoding)
    if fixed is not None:
        if fixed > len(region):
            raise CodecError(f"{encoding.value} payload ({fixed} B) exceeds its {len(region)} B region")
        return fixed
    return (fpc_bit_length(region) + 7) // 8
