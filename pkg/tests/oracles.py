"""Independent reference computations used to derive frozen test values.

Nothing here imports touchesim; each function re-derives its answer from
first principles so that a shared bug cannot hide.
"""

import math
from pathlib import Path

DATA = Path(__file__).parent / "data"


def seed0_vector() -> bytes:
    return bytes.fromhex((DATA / "seed0_random.hex").read_text().strip())


# -- base + delta ---------------------------------------------------------


BDI_SIZES = {"zeros": 1, "rep": 8, "b8d1": 16, "b4d1": 20, "b8d2": 24, "b2d1": 34, "b4d2": 36, "b8d4": 40}


def _chunks(block, k):
    return [int.from_bytes(block[i : i + k], "little") for i in range(0, 64, k)]


def _delta_ok(block, k, d):
    vals = _chunks(block, k)
    base = vals[0]
    mod = 1 << (8 * k)
    for v in vals:
        delta = (v - base) % mod
        if delta >= mod // 2:
            delta -= mod
        if not -(1 << (8 * d - 1)) <= delta < (1 << (8 * d - 1)):
            return False
    return True


def bdi_min_size(block: bytes) -> int:
    """Smallest base+delta size by brute force over every encoding, 64 if none."""
    sizes = [64]
    if not any(block):
        sizes.append(1)
    if len(set(_chunks(block, 8))) == 1:
        sizes.append(8)
    for name, size in BDI_SIZES.items():
        if name in ("zeros", "rep"):
            continue
        k, d = int(name[1]), int(name[3])
        if _delta_ok(block, k, d):
            sizes.append(size)
    return min(sizes)


# -- frequent patterns -----------------------------------------------------


def _fits_signed(v, bits):
    s = v - (1 << 32) if v >> 31 else v
    return -(1 << (bits - 1)) <= s < (1 << (bits - 1))


def fpc_word_bits(w: int) -> int:
    if w == 0:
        return 3
    if _fits_signed(w, 4):
        return 3 + 4
    if _fits_signed(w, 8):
        return 3 + 8
    b = w.to_bytes(4, "little")
    if len(set(b)) == 1:
        return 3 + 8
    cands = [3 + 32]
    if _fits_signed(w, 16):
        cands.append(3 + 16)
    if w & 0xFFFF == 0:
        cands.append(3 + 16)
    lo, hi = w & 0xFFFF, w >> 16

    def se8(h):
        return h < 0x80 or h >= 0xFF80

    if se8(lo) and se8(hi):
        cands.append(3 + 16)
    return min(cands)


def fpc_size(block: bytes) -> int:
    bits = sum(fpc_word_bits(int.from_bytes(block[i : i + 4], "little")) for i in range(0, 64, 4))
    size = math.ceil(bits / 8)
    return size if size < 64 else 64


def best_raw(block: bytes) -> int:
    return min(bdi_min_size(block), fpc_size(block))


def quantized(raw: int, superblock=False) -> int:
    if superblock and raw <= 15:
        return 15
    for c in (16, 32, 48):
        if raw <= c:
            return c
    return 64


# -- signatures ------------------------------------------------------------


def signature(tag: int, t16, t32, superblock=False) -> int:
    low = tag % (1 << 27)
    if superblock:
        low -= low % 4
    segs = [(low >> (9 * i)) % 512 for i in range(3)]
    f = segs[0] ^ segs[1] ^ segs[2]
    s = t32[f // 16] * 16 + t16[f % 16]
    return 0x1FF if s == 0 else s


def collision_exact(n, space=512):
    return 1 - ((space - 1) / space) ** n


def conditional_binomial_latency(n_lines=8, slots=3, sig_space=512, per=35.0):
    """E[extra data reads x per | at least one false match], false matches ~ Binomial(n*slots, 1/space)."""
    n = n_lines * slots
    p = 1 / sig_space
    pk = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
    tail = 1 - pk[0]
    return sum(k * per * pk[k] for k in range(1, n + 1)) / tail
