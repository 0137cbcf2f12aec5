"""Line-level replacement policies: LRU, DIP (LRU/BIP dueling), DRRIP (SRRIP/BRRIP dueling).

Blocks packed into one line share that line's state.
"""

from __future__ import annotations

from .prng import SplitMix64

PSEL_BITS = 10
PSEL_MAX = (1 << PSEL_BITS) - 1
# followers start on the first policy of the pair
PSEL_INIT = (1 << (PSEL_BITS - 1)) - 1
LEADER_SETS = 32
BIMODAL_ONE_IN = 32
RRPV_MAX = 3

FOLLOWER, LEADER_A, LEADER_B = 0, 1, 2


def leader_roles(sets: int, leaders: int = LEADER_SETS) -> list[int]:
    """Dedicate ``leaders`` sets to each dueling policy, spread evenly."""
    roles = [FOLLOWER] * sets
    n = min(leaders, sets // 2)
    if n == 0:
        return roles
    stride = sets // n
    for i in range(n):
        roles[i * stride] = LEADER_A
        roles[i * stride + stride // 2] = LEADER_B
    return roles


class LRU:
    name = "lru"

    def __init__(self, sets: int, ways: int, rng: SplitMix64 | None = None):
        self.ways = ways
        self.stamp = [[0] * ways for _ in range(sets)]
        self.clock = 0

    def _mru(self, s, w):
        self.clock += 1
        self.stamp[s][w] = self.clock

    def on_hit(self, s, w):
        self._mru(s, w)

    def on_insert(self, s, w):
        self._mru(s, w)

    def on_miss(self, s):
        pass

    def victim(self, s) -> int:
        st = self.stamp[s]
        return st.index(min(st))

    def update(self, s, w, event: str):
        (self.on_hit if event == "hit" else self.on_insert)(s, w)


class DIP(LRU):
    name = "dip"

    def __init__(self, sets: int, ways: int, rng: SplitMix64):
        super().__init__(sets, ways)
        self.rng = rng
        self.roles = leader_roles(sets)
        self.psel = PSEL_INIT

    def uses_bip(self, s) -> bool:
        role = self.roles[s]
        if role == FOLLOWER:
            return self.psel > PSEL_INIT
        return role == LEADER_B

    def on_miss(self, s):
        role = self.roles[s]
        if role == LEADER_A:
            self.psel = min(self.psel + 1, PSEL_MAX)
        elif role == LEADER_B:
            self.psel = max(self.psel - 1, 0)

    def on_insert(self, s, w):
        if self.uses_bip(s) and self.rng.randbelow(BIMODAL_ONE_IN):
            st = self.stamp[s]
            st[w] = min(st) - 1
        else:
            self._mru(s, w)


class DRRIP:
    name = "drrip"

    def __init__(self, sets: int, ways: int, rng: SplitMix64):
        self.ways = ways
        self.rng = rng
        self.rrpv = [[RRPV_MAX] * ways for _ in range(sets)]
        self.roles = leader_roles(sets)
        self.psel = PSEL_INIT

    def uses_brrip(self, s) -> bool:
        role = self.roles[s]
        if role == FOLLOWER:
            return self.psel > PSEL_INIT
        return role == LEADER_B

    def on_hit(self, s, w):
        self.rrpv[s][w] = 0

    def on_insert(self, s, w):
        if self.uses_brrip(s) and self.rng.randbelow(BIMODAL_ONE_IN):
            self.rrpv[s][w] = RRPV_MAX
        else:
            self.rrpv[s][w] = RRPV_MAX - 1

    def on_miss(self, s):
        role = self.roles[s]
        if role == LEADER_A:
            self.psel = min(self.psel + 1, PSEL_MAX)
        elif role == LEADER_B:
            self.psel = max(self.psel - 1, 0)

    def victim(self, s) -> int:
        r = self.rrpv[s]
        while True:
            for w, v in enumerate(r):
                if v >= RRPV_MAX:
                    return w
            for w in range(len(r)):
                r[w] += 1

    def update(self, s, w, event: str):
        (self.on_hit if event == "hit" else self.on_insert)(s, w)


POLICIES = {"lru": LRU, "dip": DIP, "drrip": DRRIP}


def make_policy(name: str, sets: int, ways: int, rng: SplitMix64):
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown replacement policy {name!r}") from None
    return cls(sets, ways, rng)
