"""SplitMix64, the single seeded generator behind every random draw.

SplitMix64 is used instead of :mod:`random` because its output sequence is
fixed by a five-line recurrence, so tables and markers can be regenerated
bit-for-bit from a seed in any language.
"""

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + _GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def random(self) -> float:
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def getrandbits(self, k: int) -> int:
        out = 0
        got = 0
        while got < k:
            out = (out << 64) | self.next()
            got += 64
        return out >> (got - k)


def shuffled_range(n: int, rng: SplitMix64) -> list[int]:
    """Fisher-Yates permutation of ``range(n)``."""
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm
