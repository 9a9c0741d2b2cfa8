"""Threshold quorum systems and exhaustive checks of their two properties.

Quorums are all server subsets of size at least ``threshold``. For the
coded protocols the threshold is ceil((n+k)/2); CCOAS uses n-f and the
replication baselines use a simple majority.

Subsets are handled as integer bitmasks over servers 0..n-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

from .errors import ConfigError

MAX_EXHAUSTIVE_N = 12


@dataclass(frozen=True)
class QuorumSystem:
    n: int
    threshold: int
    f: int = 0
    k: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need at least one server", "n")
        if not 1 <= self.threshold <= self.n:
            raise ConfigError(f"threshold {self.threshold} outside 1..{self.n}", "threshold")

    @classmethod
    def coded(cls, n: int, f: int, k: int) -> "QuorumSystem":
        """Quorums of size ceil((n+k)/2), as used by CAS and CASGC."""
        if n <= 2 * f:
            raise ConfigError(f"need n > 2f, got n={n}, f={f}", "f")
        if not 1 <= k <= n - 2 * f:
            raise ConfigError(
                f"k={k} violates the quorum bound 1 <= k <= n - 2f = {n - 2 * f}", "k"
            )
        return cls(n, -(-(n + k) // 2), f, k)

    @classmethod
    def n_minus_f(cls, n: int, f: int) -> "QuorumSystem":
        if n <= 2 * f:
            raise ConfigError(f"need n > 2f, got n={n}, f={f}", "f")
        return cls(n, n - f, f, n - f)

    @classmethod
    def majority(cls, n: int, f: int | None = None) -> "QuorumSystem":
        f = (n - 1) // 2 if f is None else f
        return cls(n, n // 2 + 1, f, 1)

    def is_quorum(self, servers) -> bool:
        return len(set(servers)) >= self.threshold

    def minimal_quorums(self):
        """Yield the minimal quorums as bitmasks."""
        for combo in combinations(range(self.n), self.threshold):
            mask = 0
            for i in combo:
                mask |= 1 << i
            yield mask


@lru_cache(maxsize=None)
def _min_pairwise_intersection(n: int, threshold: int) -> int:
    masks = list(QuorumSystem(n, threshold).minimal_quorums())
    best = n
    for i, a in enumerate(masks):
        for b in masks[i:]:
            c = (a & b).bit_count()
            if c < best:
                best = c
    return best


def min_intersection(qs: QuorumSystem) -> int:
    """Smallest intersection of two quorums, found by enumeration."""
    if qs.n > MAX_EXHAUSTIVE_N:
        raise ConfigError(f"exhaustive check limited to n <= {MAX_EXHAUSTIVE_N}", "n")
    return _min_pairwise_intersection(qs.n, qs.threshold)


def verify_intersection(qs: QuorumSystem) -> bool:
    """Every two quorums share at least ``k`` servers."""
    return min_intersection(qs) >= qs.k


def verify_availability(qs: QuorumSystem) -> bool:
    """For every failure set of size <= f, some quorum avoids it entirely."""
    if qs.n > MAX_EXHAUSTIVE_N:
        raise ConfigError(f"exhaustive check limited to n <= {MAX_EXHAUSTIVE_N}", "n")
    quorums = list(qs.minimal_quorums())
    for size in range(qs.f + 1):
        for failed in combinations(range(qs.n), size):
            bad = 0
            for i in failed:
                bad |= 1 << i
            if not any(q & bad == 0 for q in quorums):
                return False
    return True


def availability_by_arithmetic(qs: QuorumSystem) -> bool:
    return qs.n - qs.f >= qs.threshold
