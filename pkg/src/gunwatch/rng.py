"""Deterministic random number generation.

The whole package draws its randomness from SplitMix64 (Steele, Lea &
Flood's mixing function): state advances by a fixed odd constant and each
output is a bijective mix of the state. The stream is a pure function of
a 64-bit seed and a counter, so identical seeds give identical streams on
every platform, which is what makes checkpoints and generated datasets
bit-reproducible.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Rng:
    """SplitMix64 stream with the distribution helpers the package needs."""

    def __init__(self, seed):
        self._state = int(seed) & _MASK64

    def _bulk_u64(self, n):
        """Next n raw outputs as a uint64 array (the single primitive)."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self._state) + np.uint64(_GOLDEN) * steps
        if n:
            self._state = int(states[-1])
        z = states
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def next_u64(self):
        return int(self._bulk_u64(1)[0])

    def derive(self, tag):
        """Independent child stream, e.g. one per dataset class."""
        mixed = Rng(int(tag) & _MASK64)._bulk_u64(1)[0]
        return Rng(self._state ^ int(mixed) ^ _GOLDEN)

    def uniform(self, size=None):
        """Uniform float64 in [0, 1) with 53-bit resolution."""
        n = 1 if size is None else int(np.prod(size))
        out = (self._bulk_u64(n) >> np.uint64(11)) * 2.0**-53
        return float(out[0]) if size is None else out.reshape(size)

    def normal(self, size=None):
        """Standard normal via Box-Muller; draws uniforms in pairs."""
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        u = self.uniform((2 * pairs,))
        # 1 - u keeps the log argument in (0, 1], avoiding log(0)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        out = out[:n]
        return float(out[0]) if size is None else out.reshape(size)

    def randint(self, n):
        """Integer in [0, n). Modulo bias is < 2**-50 for any n used here."""
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        return self.next_u64() % n

    def shuffle(self, seq):
        """In-place Fisher-Yates shuffle of a list or 1-D array."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
        return seq

    def permutation(self, n):
        idx = np.arange(n)
        self.shuffle(idx)
        return idx
