"""9-bit tag signatures: XOR fold of the low 27 tag bits, then two permutation tables."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .prng import SplitMix64, shuffled_range

SIG_BITS = 9
SIG_MASK = (1 << SIG_BITS) - 1
EMPTY = 0
# a freshly generated 0 would read as an empty slot
REMAP_ZERO = SIG_MASK
SLOTS = 3
TABLES_FORMAT = "touchesim-signature-tables"
TABLES_VERSION = 1


@dataclass(frozen=True)
class SignatureTables:
    t16: tuple[int, ...]
    t32: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if sorted(self.t16) != list(range(16)) or sorted(self.t32) != list(range(32)):
            raise ValueError("signature tables must be permutations of 0..15 and 0..31")

    def to_json(self) -> dict:
        return {
            "format": TABLES_FORMAT,
            "version": TABLES_VERSION,
            "seed": self.seed,
            "t16": list(self.t16),
            "t32": list(self.t32),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SignatureTables":
        if doc.get("format") != TABLES_FORMAT or doc.get("version") != TABLES_VERSION:
            raise ValueError("not a version-1 signature table document")
        return cls(tuple(doc["t16"]), tuple(doc["t32"]), int(doc["seed"]))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SignatureTables":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_tables(seed: int, identity: bool = False) -> SignatureTables:
    seed &= (1 << 64) - 1
    if identity:
        return SignatureTables(tuple(range(16)), tuple(range(32)), seed)
    rng = SplitMix64(seed)
    t16 = shuffled_range(16, rng)
    t32 = shuffled_range(32, rng)
    return SignatureTables(tuple(t16), tuple(t32), seed)


def fold(tag: int, superblock: bool = False) -> int:
    t = tag & 0x7FFFFFF
    if superblock:
        t &= ~0b11
    return (t ^ (t >> 9) ^ (t >> 18)) & SIG_MASK


def make_signature(tag: int, tables: SignatureTables, superblock: bool = False) -> int:
    if tag < 0 or tag >> 29:
        raise ValueError(f"tag {tag:#x} does not fit in 29 bits")
    f = fold(tag, superblock)
    sig = (tables.t32[f >> 4] << 4) | tables.t16[f & 0xF]
    return sig or REMAP_ZERO


def slots_of(tag_field: int) -> tuple[int, int, int]:
    """Slot 0 sits in the highest 9 bits of the 27-bit signature area."""
    return (tag_field >> 18) & SIG_MASK, (tag_field >> 9) & SIG_MASK, tag_field & SIG_MASK


def match_slots(tag_field: int, sig: int) -> list[int]:
    if sig == EMPTY:
        return []
    return [i for i, s in enumerate(slots_of(tag_field)) if s == sig]


def collision_probability(n_signatures: int, bits: int = SIG_BITS) -> float:
    """Chance that a non-resident block matches at least one of n stored signatures."""
    if n_signatures < 0:
        raise ValueError("n_signatures must be >= 0")
    space = 1 << bits
    return 1.0 - ((space - 1) / space) ** n_signatures
