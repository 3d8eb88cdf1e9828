"""Seeded, splittable random streams.

Built on numpy's counter-based Philox generator keyed through SeedSequence
spawn keys: the sequence produced by a stream is a pure function of
(seed, key path), independent of thread scheduling or creation order, so
any two streams with distinct key paths are statistically independent and
every run is bit-reproducible for a fixed seed and key discipline.

Sampling methods count logical draws (one per generated value), which the
test suite uses to verify how many noise values an operation consumes.
"""

import numpy as np


class RngStream:
    __slots__ = ("seed", "key", "draw_count", "_gen")

    def __init__(self, seed, key=()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.draw_count = 0
        self._gen = None

    @property
    def generator(self):
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def child(self, *key):
        """Derive an independent stream for the given sub-key path."""
        return RngStream(self.seed, self.key + tuple(key))

    def stream(self, chain, particle, time):
        """Stream addressed by the (chain id, particle id, time index) triple."""
        return self.child(chain, particle, time)

    def _count(self, value):
        self.draw_count += int(np.size(value))
        return value

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._count(self.generator.uniform(low, high, size))

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._count(self.generator.normal(loc, scale, size))

    def gamma(self, shape, scale=1.0, size=None):
        return self._count(self.generator.gamma(shape, scale, size))

    def standard_normal(self, size=None):
        return self._count(self.generator.standard_normal(size))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"
