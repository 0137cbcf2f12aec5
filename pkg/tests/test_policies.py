import pytest

from touchesim.policies import DIP, DRRIP, LRU, PSEL_INIT, PSEL_MAX, RRPV_MAX, leader_roles, make_policy
from touchesim.prng import SplitMix64


def test_leader_roles():
    roles = leader_roles(1024)
    assert roles.count(1) == 32 and roles.count(2) == 32
    assert leader_roles(1) == [0]


def test_lru_order():
    p = LRU(1, 4)
    for w in range(4):
        p.on_insert(0, w)
    p.on_hit(0, 0)
    assert p.victim(0) == 1


def test_dip_psel_moves_and_saturates():
    p = DIP(1024, 4, SplitMix64(1))
    a = p.roles.index(1)
    b = p.roles.index(2)
    for _ in range(2000):
        p.on_miss(a)
    assert p.psel == PSEL_MAX
    f = p.roles.index(0)
    assert p.uses_bip(f) and not p.uses_bip(a) and p.uses_bip(b)
    for _ in range(2000):
        p.on_miss(b)
    assert p.psel == 0 and not p.uses_bip(f)


def test_bip_mostly_inserts_at_lru():
    p = DIP(64, 4, SplitMix64(3))
    s = p.roles.index(2)
    mru = 0
    for i in range(3200):
        for w in range(4):
            p._mru(s, w)
        p.on_insert(s, 0)
        mru += p.victim(s) != 0
    assert 50 < mru < 150  # about 1 in 32


def test_drrip():
    p = DRRIP(64, 4, SplitMix64(2))
    s = p.roles.index(1)  # SRRIP leader
    for w in range(4):
        p.on_insert(s, w)
    assert p.rrpv[s] == [RRPV_MAX - 1] * 4
    p.on_hit(s, 2)
    v = p.victim(s)
    assert v == 0 and p.rrpv[s] == [3, 3, 1, 3]
    assert p.psel == PSEL_INIT


def test_make_policy():
    for name in ("lru", "dip", "drrip"):
        assert make_policy(name, 16, 4, SplitMix64(0)).name == name
    with pytest.raises(ValueError):
        make_policy("plru", 16, 4, SplitMix64(0))
