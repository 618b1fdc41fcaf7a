"""Seedable random streams shared by the two walk engines.

The exploration walk exists twice: a step-by-step pure-Python engine
(`walk`) and a compiled batch engine (`fastwalk`). Their traces are
compared bit for bit in the test suite, which is only possible if both
draw from identical streams. numpy's Generator cannot run inside numba
kernels, so both engines sit on the same hand-rolled xoshiro256++
generator and the same exact binomial sampler. The numba twin of this
module lives in `fastwalk`; any change here must be mirrored there.

Everything else in the package (type sampling, explicit graphs, limit
paths) uses numpy Generators. Per-replica seeds and generators are pure
functions of (master seed, dimension indices) via numpy's SeedSequence,
so experiment results never depend on worker count or scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / 9007199254740992.0  # 2^-53

# Mean above which a binomial draw is split into chunks so that the
# sequential-inversion CDF never underflows.
_BINOMIAL_INVERSION_MEAN = 30.0


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Stream:
    """xoshiro256++ stream with the samplers the walk engines need.

    One Stream per replica; never share across threads.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        seed = int(seed) & _MASK64
        seed, self._s0 = _splitmix64(seed)
        seed, self._s1 = _splitmix64(seed)
        seed, self._s2 = _splitmix64(seed)
        seed, self._s3 = _splitmix64(seed)

    def u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s0 + s3) & _MASK64
        result = (((x << 23) | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1), 53 random bits."""
        return (self.u64() >> 11) * _INV53

    def binomial(self, n: int, p: float) -> int:
        """Exact Binomial(n, p) draw by sequential inversion.

        Draws with p > 1/2 use the complement; means above
        _BINOMIAL_INVERSION_MEAN are split into independent chunks.
        """
        if n <= 0 or p <= 0.0:
            return 0
        if p >= 1.0:
            return n
        flip = p > 0.5
        q = 1.0 - p if flip else p
        total = 0
        remaining = n
        while remaining > 0:
            if remaining * q <= _BINOMIAL_INVERSION_MEAN:
                chunk = remaining
            else:
                chunk = int(_BINOMIAL_INVERSION_MEAN / q)
            total += self._binomial_inversion(chunk, q)
            remaining -= chunk
        return (n - total) if flip else total

    def _binomial_inversion(self, n: int, q: float) -> int:
        u = self.uniform()
        f = (1.0 - q) ** n
        cdf = f
        ratio = q / (1.0 - q)
        k = 0
        while u > cdf and k < n:
            k += 1
            f *= ratio * (n - k + 1) / k
            cdf += f
        return k

    def pick(self, weights) -> int:
        """Index drawn proportionally to non-negative weights (sum > 0)."""
        total = 0.0
        for w in weights:
            total += w
        u = self.uniform() * total
        acc = 0.0
        last = len(weights) - 1
        for i in range(last):
            acc += weights[i]
            if u < acc:
                return i
        return last

    def multinomial(self, n: int, probs) -> np.ndarray:
        """Multinomial counts by conditional binomial splitting."""
        k = len(probs)
        out = np.zeros(k, dtype=np.int64)
        remaining = int(n)
        rest = 1.0
        for i in range(k - 1):
            if remaining == 0 or rest <= 0.0:
                break
            p = probs[i] / rest
            if p > 1.0:
                p = 1.0
            elif p < 0.0:
                p = 0.0
            c = self.binomial(remaining, p)
            out[i] = c
            remaining -= c
            rest -= probs[i]
        out[k - 1] = remaining
        return out


def child_seed(master_seed: int, *key: int) -> int:
    """64-bit seed, a pure function of the master seed and index key."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def generator(master_seed: int, *key: int) -> np.random.Generator:
    """numpy Generator keyed the same way as child_seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
