"""Poisson contact-count mathematics.

The number of contacts between two users within a window ``T`` is Poisson
with mean ``lambda * T``. Each contact moves at most ``B`` segments, so the
segments of a file a user can pull from a neighbour caching ``x`` of them is
``min(B * M, x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

__all__ = [
    "LOG_SPACE_THRESHOLD",
    "PoissonParams",
    "TransferDistribution",
    "poisson_pmf",
    "poisson_pmf_prefix",
    "poisson_tail",
    "expected_truncated_transfer",
    "transfer_distribution",
]

# pmf is evaluated directly below this mean / count and in log space above it
LOG_SPACE_THRESHOLD = 30


@dataclass(frozen=True)
class PoissonParams:
    mean: float

    def __post_init__(self):
        if not (self.mean >= 0 and math.isfinite(self.mean)):
            raise ValueError(f"Poisson mean must be finite and nonnegative, got {self.mean!r}")


@dataclass(frozen=True)
class TransferDistribution:
    """Law of ``min(B*M, x)``: point masses ``mass[n]`` at ``support[n]``."""

    support: Tuple[int, ...]
    mass: Tuple[float, ...]

    def expectation(self) -> float:
        return math.fsum(s * p for s, p in zip(self.support, self.mass))

    def as_dict(self):
        return dict(zip(self.support, self.mass))


def _check_mean(mean):
    if not (mean >= 0 and math.isfinite(mean)):
        raise ValueError(f"Poisson mean must be finite and nonnegative, got {mean!r}")


def poisson_pmf(mean: float, m: int) -> float:
    """``P(M = m)`` for ``M ~ Poisson(mean)``."""
    _check_mean(mean)
    if m < 0:
        return 0.0
    if mean == 0:
        return 1.0 if m == 0 else 0.0
    if mean > LOG_SPACE_THRESHOLD or m > LOG_SPACE_THRESHOLD:
        return math.exp(m * math.log(mean) - mean - math.lgamma(m + 1))
    return math.exp(-mean) * mean**m / math.factorial(m)


def poisson_pmf_prefix(mean: float, n: int) -> np.ndarray:
    """``[P(M = 0), ..., P(M = n-1)]``."""
    return np.array([poisson_pmf(mean, m) for m in range(n)], dtype=float)


def poisson_tail(mean: float, m: int) -> float:
    """``P(M >= m)`` computed as ``1 - sum_{k<m} pmf(k)`` with compensated summation."""
    if m <= 0:
        return 1.0
    head = math.fsum(poisson_pmf(mean, k) for k in range(m))
    return max(0.0, 1.0 - head)


def expected_truncated_transfer(mean: float, budget: int, cap: int) -> float:
    """``E[min(budget * M, cap)]`` for ``M ~ Poisson(mean)``.

    Only ``m* = ceil(cap / budget)`` pmf terms are needed: every contact
    count at or beyond ``m*`` already saturates at ``cap``.
    """
    _check_mean(mean)
    if budget < 1:
        raise ValueError("budget must be a positive integer")
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    if cap == 0:
        return 0.0
    m_star = -(-cap // budget)
    pmf = [poisson_pmf(mean, m) for m in range(m_star)]
    head = math.fsum(budget * m * p for m, p in enumerate(pmf))
    tail = max(0.0, 1.0 - math.fsum(pmf))
    return head + cap * tail


def transfer_distribution(mean: float, budget: int, cached: int) -> TransferDistribution:
    """Exact distribution of ``min(budget * M, cached)``."""
    _check_mean(mean)
    if budget < 1:
        raise ValueError("budget must be a positive integer")
    if cached < 0:
        raise ValueError("cached must be nonnegative")
    if cached == 0:
        return TransferDistribution((0,), (1.0,))
    m_star = -(-cached // budget)
    pmf = [poisson_pmf(mean, m) for m in range(m_star)]
    tail = max(0.0, 1.0 - math.fsum(pmf))
    support = tuple(budget * m for m in range(m_star)) + (cached,)
    return TransferDistribution(support, tuple(pmf) + (tail,))
