"""Frequency sketches for per-domain response counting.

:class:`CountMinSketch` backs the volume rule. :class:`DistinctWeightedSampler`
(fixed-size, dwsHH) and :class:`ThresholdSampler` (fixed-threshold, WS) are
reference heavy-hitter structures kept for comparison benchmarks.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections.abc import Hashable

COUNTER_MAX = 0xFFFFFFFF
_MASK128 = (1 << 128) - 1
_COLUMN_CACHE_LIMIT = 1 << 17


def fingerprint(key: Hashable) -> int:
    """Stable 64-bit fingerprint of a key (independent of PYTHONHASHSEED)."""
    return int.from_bytes(hashlib.blake2b(str(key).encode(), digest_size=8).digest(), "big")


class CountMinSketch:
    """d x w matrix of saturating 32-bit counters.

    Row ``i`` addresses column ``h_i(x) = (((a_i * x + b_i) mod 2^128) >> 64) * w >> 64``
    where ``x`` is the key's 64-bit fingerprint and ``a_i`` (odd), ``b_i`` are
    128-bit seeds drawn from ``seed``. This is the multiply-add-shift family,
    which is pairwise independent over 64-bit keys.
    """

    def __init__(self, d: int = 5, w: int = 200, seed: int = 0) -> None:
        if d < 1 or w < 1:
            raise ValueError(f"d and w must be positive, got d={d}, w={w}")
        self.d = d
        self.w = w
        self.seed = seed
        rng = random.Random(seed)
        self.hash_seeds: tuple[tuple[int, int], ...] = tuple(
            (rng.getrandbits(128) | 1, rng.getrandbits(128)) for _ in range(d)
        )
        self.counters: list[list[int]] = [[0] * w for _ in range(d)]
        self._columns: dict[Hashable, tuple[int, ...]] = {}

    def columns(self, key: Hashable) -> tuple[int, ...]:
        cols = self._columns.get(key)
        if cols is None:
            x = fingerprint(key)
            w = self.w
            cols = tuple(((((a * x + b) & _MASK128) >> 64) * w) >> 64 for a, b in self.hash_seeds)
            if len(self._columns) >= _COLUMN_CACHE_LIMIT:
                self._columns.clear()
            self._columns[key] = cols
        return cols

    def add(self, key: Hashable, count: int = 1) -> None:
        cols = self._columns.get(key) or self.columns(key)
        for row, col in zip(self.counters, cols):
            value = row[col] + count
            row[col] = value if value < COUNTER_MAX else COUNTER_MAX

    def estimate(self, key: Hashable) -> int:
        cols = self._columns.get(key) or self.columns(key)
        return min([row[col] for row, col in zip(self.counters, cols)])

    def reset(self) -> None:
        for row in self.counters:
            row[:] = [0] * self.w

    @property
    def epsilon(self) -> float:
        """Additive error factor e/w (error <= epsilon * stream length)."""
        return math.e / self.w

    @property
    def delta(self) -> float:
        """Failure probability e^-d implied by the depth."""
        return math.exp(-self.d)

    @property
    def memory_bytes(self) -> int:
        return self.d * self.w * 4

    def __repr__(self) -> str:
        return f"CountMinSketch(d={self.d}, w={self.w}, seed={self.seed})"


def cms_add(s: CountMinSketch, key: Hashable) -> CountMinSketch:
    s.add(key)
    return s


def cms_estimate(s: CountMinSketch, key: Hashable) -> int:
    return s.estimate(key)


def cms_reset(s: CountMinSketch) -> CountMinSketch:
    s.reset()
    return s


class DistinctWeightedSampler:
    """Fixed-size weighted sample of at most ``k`` keys (dwsHH).

    Each key gets a seeded uniform rank ``u(x)`` in (0, 1]. A cached key's
    priority is ``count / u(x)``; an uncached arrival competes with priority
    ``weight / u(x)`` and evicts the lowest-priority cached key when it wins.
    Counts of evicted keys are forgotten.
    """

    def __init__(self, k: int = 100, seed: int = 0) -> None:
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        self.seed = seed
        self.counts: dict[Hashable, float] = {}

    def _rank(self, key: Hashable) -> float:
        return (fingerprint((self.seed, key)) + 1) / 2.0**64

    def add(self, key: Hashable, weight: float = 1.0) -> None:
        if key in self.counts:
            self.counts[key] += weight
            return
        if len(self.counts) < self.k:
            self.counts[key] = weight
            return
        victim = min(self.counts, key=lambda y: self.counts[y] / self._rank(y))
        if weight / self._rank(key) > self.counts[victim] / self._rank(victim):
            del self.counts[victim]
            self.counts[key] = weight

    def estimate(self, key: Hashable) -> float:
        return self.counts.get(key, 0)


class ThresholdSampler:
    """Fixed-threshold weighted sampling (WS).

    An arrival enters the sample when its weight exceeds ``tau``; sampled
    keys accumulate every later arrival.
    """

    def __init__(self, tau: float = 0.01) -> None:
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.tau = tau
        self.counts: dict[Hashable, float] = {}

    def add(self, key: Hashable, weight: float = 1.0) -> None:
        if key in self.counts:
            self.counts[key] += weight
        elif weight > self.tau:
            self.counts[key] = weight

    def estimate(self, key: Hashable) -> float:
        return self.counts.get(key, 0)


def dwshh_add(s: DistinctWeightedSampler, key: Hashable, weight: float = 1.0) -> DistinctWeightedSampler:
    s.add(key, weight)
    return s


def dwshh_estimate(s: DistinctWeightedSampler, key: Hashable) -> float:
    return s.estimate(key)


def ws_add(s: ThresholdSampler, key: Hashable, weight: float = 1.0) -> ThresholdSampler:
    s.add(key, weight)
    return s


def ws_estimate(s: ThresholdSampler, key: Hashable) -> float:
    return s.estimate(key)
