"""Two-sample statistics: Mann-Whitney U and a seeded percentile bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import EmptyInput

EXACT_LIMIT = 200  # |x|*|y| at or below which p is computed exactly

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator; ``uniform`` yields 53-bit floats in [0, 1)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def index(self, n: int) -> int:
        return int(self.uniform() * n)


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return ranks


@dataclass(frozen=True)
class MannWhitneyResult:
    U: float
    p_two_sided: float
    exact: bool


def _u_statistic(x: Sequence[float], y: Sequence[float]) -> tuple[float, list[int]]:
    ranks = midranks(list(x) + list(y))
    n = len(x)
    # doubled ranks are integers even with midrank ties
    doubled = [int(round(2 * r)) for r in ranks]
    rank_sum = sum(ranks[:n])
    u = rank_sum - n * (n + 1) / 2.0
    return u, doubled


def _rank_sum_counts(doubled: Sequence[int], n: int) -> dict[int, int]:
    """Number of size-``n`` subsets of ``doubled`` per subset sum (exact integers)."""
    # dp[k] maps subset-sum -> count of k-subsets
    dp: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    dp[0][0] = 1
    for v in doubled:
        for k in range(min(n, len(doubled)), 0, -1):
            prev = dp[k - 1]
            if not prev:
                continue
            cur = dp[k]
            for s, c in prev.items():
                cur[s + v] = cur.get(s + v, 0) + c
    return dp[n]


def _exact_p(doubled: Sequence[int], n: int, m: int, u_obs: float) -> float:
    # In doubled units: 2U = 2*ranksum - n(n+1); centre of U is nm/2.
    counts = _rank_sum_counts(doubled, n)
    total = sum(counts.values())
    dev_obs = abs(int(round(2 * u_obs)) * 2 - 2 * n * m)  # 4*|U - nm/2|
    extreme = 0
    for s2, c in counts.items():
        u2 = s2 - n * (n + 1)  # 2U
        if abs(2 * u2 - 2 * n * m) >= dev_obs:
            extreme += c
    return min(1.0, extreme / total)


def _normal_p(ranks_all: Sequence[float], n: int, m: int, u_obs: float) -> float:
    big_n = n + m
    ties = {}
    for r in ranks_all:
        ties[r] = ties.get(r, 0) + 1
    tie_term = sum(t**3 - t for t in ties.values())
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    dev = abs(u_obs - n * m / 2.0)
    z = max(dev - 0.5, 0.0) / math.sqrt(var)  # continuity-corrected
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MannWhitneyResult:
    """U for ``x`` (pairs with x > y, ties counting one half) and a two-sided p.

    p is exact over all rank configurations when ``len(x) * len(y) <= 200``:
    the probability, under random relabelling of the pooled midranks, of a U at
    least as far from ``nm/2`` as the observed one. Larger samples use the normal
    approximation with tie and continuity corrections.
    """
    if not x or not y:
        raise EmptyInput("mann_whitney_u needs two nonempty samples")
    n, m = len(x), len(y)
    u, doubled = _u_statistic(x, y)
    if n * m <= EXACT_LIMIT:
        return MannWhitneyResult(U=u, p_two_sided=_exact_p(doubled, n, m, u), exact=True)
    ranks = [d / 2.0 for d in doubled]
    return MannWhitneyResult(U=u, p_two_sided=_normal_p(ranks, n, m, u), exact=False)


def bootstrap_ci(x: Sequence[float], y: Sequence[float], b: int = 10_000, level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for ``mean(x) - mean(y)``.

    Each replicate draws ``len(x)`` indices into ``x`` then ``len(y)`` into ``y``
    from one SplitMix64 stream, index = floor(u * n). Endpoints are the order
    statistics at positions floor(a/2 * b) and ceil((1 - a/2) * b) - 1 of the
    sorted replicates, with a = 1 - level.
    """
    if not x or not y:
        raise EmptyInput("bootstrap_ci needs two nonempty samples")
    if b < 1000:
        raise ValueError(f"b must be >= 1000, got {b}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    rng = SplitMix64(seed)
    xs, ys = [float(v) for v in x], [float(v) for v in y]
    nx, ny = len(xs), len(ys)
    diffs = []
    for _ in range(b):
        sx = math.fsum(xs[rng.index(nx)] for _ in range(nx))
        sy = math.fsum(ys[rng.index(ny)] for _ in range(ny))
        diffs.append(sx / nx - sy / ny)
    diffs.sort()
    alpha = 1.0 - level
    lo = diffs[int(math.floor(alpha / 2 * b))]
    hi = diffs[int(math.ceil((1 - alpha / 2) * b)) - 1]
    return lo, hi
