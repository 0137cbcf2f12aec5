"""Synthetic workload profiles: block contents by compressibility and address streams."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields

from ..codec import SizeClass
from ..prng import SplitMix64
from .trace import TraceEvent

MiB = 1 << 20
KINDS = ("zeros", "delta1", "delta2", "delta4", "random")
# class each content kind lands in outside a superblock
KIND_CLASS = {
    "zeros": SizeClass.C16,
    "delta1": SizeClass.C16,
    "delta2": SizeClass.C32,
    "delta4": SizeClass.C48,
    "random": SizeClass.C64,
}


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Knobs for a synthetic trace.

    ``delta_mix`` splits ``base_delta_frac`` between 1-, 2- and 4-byte
    deltas (16, 32 and 48 byte classes). ``working_set_lines`` bounds the
    uniform pattern to the first N lines of the footprint (0 = all of it);
    the sweep pattern walks the whole footprint in group order. With
    ``group_content`` the four neighbors of a group share a content kind.
    """

    zeros_frac: float = 0.0
    base_delta_frac: float = 0.0
    random_frac: float = 1.0
    delta_mix: tuple = (1.0, 0.0, 0.0)
    superblock_locality: float = 0.0
    working_set_lines: int = 0
    footprint_bytes: int = 16 * MiB
    pattern: str = "uniform"
    write_frac: float = 0.0
    group_content: bool = True
    base_addr: int = 0
    name: str = "custom"

    def __post_init__(self):
        fracs = (self.zeros_frac, self.base_delta_frac, self.random_frac)
        if any(f < 0 for f in fracs) or not math.isclose(sum(fracs), 1.0, abs_tol=1e-9):
            raise ProfileError(f"content fractions must be >= 0 and sum to 1, got {fracs}")
        mix = tuple(float(x) for x in self.delta_mix)
        if len(mix) != 3 or any(x < 0 for x in mix) or not math.isclose(sum(mix), 1.0, abs_tol=1e-9):
            raise ProfileError(f"delta_mix must be three weights summing to 1, got {self.delta_mix}")
        object.__setattr__(self, "delta_mix", mix)
        for name in ("superblock_locality", "write_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ProfileError(f"{name} must lie in [0, 1]")
        if self.pattern not in ("uniform", "sweep"):
            raise ProfileError(f"unknown pattern {self.pattern!r}")
        if self.footprint_bytes < 256 or self.footprint_bytes % 256:
            raise ProfileError("footprint_bytes must be a positive multiple of 256")
        if self.working_set_lines < 0 or self.base_addr % 256:
            raise ProfileError("working_set_lines must be >= 0 and base_addr 256-byte aligned")

    @property
    def kind_weights(self) -> dict[str, float]:
        d1, d2, d4 = self.delta_mix
        bd = self.base_delta_frac
        return {"zeros": self.zeros_frac, "delta1": bd * d1, "delta2": bd * d2, "delta4": bd * d4, "random": self.random_frac}

    def class_mix(self) -> dict[SizeClass, float]:
        """Expected share of each size class among generated blocks (no superblock packing)."""
        mix = {c: 0.0 for c in SizeClass if c is not SizeClass.C15}
        for kind, w in self.kind_weights.items():
            mix[KIND_CLASS[kind]] += w
        return mix

    def to_json(self) -> dict:
        d = asdict(self)
        d["delta_mix"] = list(self.delta_mix)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "Profile":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ProfileError(f"unknown profile fields: {sorted(unknown)}")
        doc = dict(doc)
        if "delta_mix" in doc:
            doc["delta_mix"] = tuple(doc["delta_mix"])
        return cls(**doc)


PRESETS = {
    "zeros": Profile(zeros_frac=1.0, random_frac=0.0, superblock_locality=1.0, pattern="sweep", name="zeros"),
    "random": Profile(name="random"),
    # 55% of blocks compress to 48 bytes or less
    "partial": Profile(zeros_frac=0.15, base_delta_frac=0.40, random_frac=0.45, delta_mix=(0.35, 0.35, 0.30), superblock_locality=0.5, name="partial"),
    "mixed": Profile(zeros_frac=0.3, base_delta_frac=0.4, random_frac=0.3, delta_mix=(0.5, 0.3, 0.2), superblock_locality=0.5, write_frac=0.2, name="mixed"),
}


def load_profile(name: str) -> Profile:
    """A preset name or a path to a JSON profile document."""
    if name in PRESETS:
        return PRESETS[name]
    try:
        with open(name) as fh:
            return Profile.from_json(json.load(fh))
    except FileNotFoundError:
        raise ProfileError(f"{name!r} is neither a preset ({', '.join(PRESETS)}) nor a readable file") from None
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{name}: {exc}") from None


def _digest(seed: int, addr: int, salt: bytes) -> bytes:
    h = hashlib.blake2b(digest_size=64, salt=salt.ljust(16, b"\0")[:16])
    h.update(seed.to_bytes(8, "little", signed=False) + addr.to_bytes(8, "little"))
    return h.digest()


def content_kind(profile: Profile, seed: int, addr: int) -> str:
    key = addr >> 8 if profile.group_content else addr >> 6
    u = int.from_bytes(_digest(seed, key, b"kind")[:8], "little") / 2.0**64
    acc = 0.0
    last = "random"
    for kind, w in profile.kind_weights.items():
        if w <= 0:
            continue
        last = kind
        acc += w
        if u < acc:
            return kind
    return last


def _deltas(raw: bytes, width: int) -> list[int]:
    lo, hi = -(1 << (8 * width - 1)), (1 << (8 * width - 1)) - 1
    narrow = (1 << (4 * width - 1)) if width > 1 else 1
    out = []
    for i in range(8):
        v = int.from_bytes(raw[4 * i : 4 * i + 4], "little")
        out.append(lo + v % (hi - lo + 1))
    # one delta must need the full width so the block lands in its class
    out[1] = hi if width > 1 else (out[1] or 1)
    if width > 1 and narrow:
        out[1] = max(out[1], narrow)
    out[0] = 0
    return out


def block_content(profile: Profile, seed: int, addr: int, version: int = 0) -> bytes:
    """Deterministic 64-byte content for ``addr`` (``version`` > 0 for rewrites)."""
    kind = content_kind(profile, seed, addr)
    if kind == "zeros":
        return bytes(64)
    d = _digest(seed, (addr >> 6) | (version << 48), b"data")
    if kind == "random":
        return d
    width = {"delta1": 1, "delta2": 2, "delta4": 4}[kind]
    base = int.from_bytes(d[:8], "little") | (1 << 63) | (1 << 40)
    out = b"".join(((base + x) % (1 << 64)).to_bytes(8, "little") for x in _deltas(d[8:40], width))
    return out


class BackingMemory:
    """Sparse main memory: written blocks, else profile-generated content."""

    def __init__(self, profile: Profile | None = None, seed: int = 0):
        self.profile = profile or PRESETS["random"]
        self.seed = seed
        self.blocks: dict[int, bytes] = {}

    def read(self, addr: int) -> bytes:
        got = self.blocks.get(addr)
        return got if got is not None else block_content(self.profile, self.seed, addr)

    def write(self, addr: int, data: bytes) -> None:
        self.blocks[addr] = bytes(data)


def synth_generate(profile: Profile, seed: int, n: int):
    """Yield ``n`` TraceEvents following ``profile``."""
    if n < 0:
        raise ProfileError("n must be >= 0")
    rng = SplitMix64(seed ^ 0x5EED5EED5EED5EED)
    lines = profile.footprint_bytes // 64
    groups = lines // 4
    ws_groups = groups
    if profile.working_set_lines:
        ws_groups = max(1, min(groups, profile.working_set_lines // 4))
    cursor = 0
    emitted = 0
    while emitted < n:
        if profile.pattern == "sweep":
            g = cursor
            cursor = (cursor + 1) % groups
        else:
            g = rng.randbelow(ws_groups)
        if rng.random() < profile.superblock_locality:
            positions = range(4)
        else:
            positions = (rng.randbelow(4),)
        for p in positions:
            addr = profile.base_addr + (g * 4 + p) * 64
            emitted += 1
            if profile.write_frac and rng.random() < profile.write_frac:
                yield TraceEvent("W", addr, block_content(profile, seed, addr, version=emitted))
            else:
                yield TraceEvent("R", addr, None)
            if emitted == n:
                return
