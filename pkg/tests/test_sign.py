import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import collision_exact, signature
from touchesim.sign import (
    EMPTY,
    REMAP_ZERO,
    SignatureTables,
    build_tables,
    collision_probability,
    make_signature,
    match_slots,
)

ID = build_tables(0, identity=True)
tags = st.integers(0, (1 << 29) - 1)


def test_identity_tables():
    assert ID.t16 == tuple(range(16)) and ID.t32 == tuple(range(32))


def test_tables_deterministic_and_seed_sensitive():
    assert build_tables(1) == build_tables(1)
    assert build_tables(1) != build_tables(2)
    t = build_tables(1)
    assert sorted(t.t16) == list(range(16)) and sorted(t.t32) == list(range(32))


def test_table_json_roundtrip(tmp_path):
    t = build_tables(12345)
    p = tmp_path / "t.json"
    t.dump(p)
    assert SignatureTables.load(p) == t
    doc = json.loads(p.read_text())
    assert doc["format"] == "touchesim-signature-tables" and doc["version"] == 1


def test_table_validation():
    with pytest.raises(ValueError):
        SignatureTables(tuple([0] * 16), tuple(range(32)), 0)


def test_zero_tag_remaps():
    assert make_signature(0, ID) == REMAP_ZERO


def test_xor_identity():
    tag = 1 | (1 << 9) | (1 << 18)
    assert make_signature(tag, ID) == 1


def test_tag_width_checked():
    with pytest.raises(ValueError):
        make_signature(1 << 29, ID)


@given(tags, st.integers(0, 2**64 - 1))
def test_matches_oracle(tag, seed):
    t = build_tables(seed)
    for sb in (False, True):
        assert make_signature(tag, t, sb) == signature(tag, t.t16, t.t32, sb)


@given(tags)
def test_superblock_agreement(tag):
    t = build_tables(7)
    base = tag & ~3
    assert len({make_signature(base | i, t, True) for i in range(4)}) == 1


@given(tags)
def test_never_empty(tag):
    assert make_signature(tag, build_tables(3)) != EMPTY


def test_high_tag_bits_ignored():
    assert make_signature(0x1234567, ID) == make_signature(0x1234567 | (3 << 27), ID)


def test_match_slots():
    f = lambda a, b, c: (a << 18) | (b << 9) | c
    assert match_slots(f(77, EMPTY, EMPTY), 77) == [0]
    assert match_slots(f(5, 5, 9), 5) == [0, 1]
    assert match_slots(0, 5) == []
    assert match_slots(0, EMPTY) == []


def test_collision_probability():
    assert collision_probability(0) == 0.0
    assert collision_probability(1) == pytest.approx(1 / 512)
    assert collision_probability(24) == pytest.approx(collision_exact(24))
    assert round(collision_probability(24) * 100, 2) == 4.58
    with pytest.raises(ValueError):
        collision_probability(-1)


def test_uniformity_chi_square():
    rng = random.Random(11)
    t = build_tables(rng.getrandbits(64))
    n = 200_000
    hist = [0] * 512
    for _ in range(n):
        hist[make_signature(rng.getrandbits(29), t)] += 1
    assert hist[EMPTY] == 0
    # 0x1FF carries the remapped zero fold: twice the mass
    exp = [n / 512] * 512
    exp[REMAP_ZERO] = 2 * n / 512
    chi = sum((hist[i] - exp[i]) ** 2 / exp[i] for i in range(1, 512))
    # 510 dof, 0.1% critical value ~ 617
    assert chi < 617


def test_monte_carlo_n24():
    rng = random.Random(5)
    t = build_tables(99)
    trials = 100_000
    hits = 0
    for _ in range(trials):
        stored = {make_signature(rng.getrandbits(29), t) for _ in range(24)}
        hits += make_signature(rng.getrandbits(29), t) in stored
    sd = math.sqrt(0.0458 * 0.9542 / trials)
    assert abs(hits / trials - collision_exact(24)) < 5 * sd
