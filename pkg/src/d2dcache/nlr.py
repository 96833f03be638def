"""Expected network-load ratio (NLR) of a placement.

Three evaluators share :class:`NlrReport`:

* :func:`expected_nlr` -- exact, by truncated convolution of the per-neighbour
  transfer laws (mass at or beyond the recovery threshold is lumped).
* :func:`expected_nlr_monte_carlo` -- sampling of the contact counts.
* :func:`lower_bound_nlr` -- the linearizable bound that replaces
  ``E[max(S_rec - S, 0)]`` by ``max(S_rec - E[S], 0)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .contact import expected_truncated_transfer, poisson_pmf, transfer_distribution
from .model import Placement, Scenario, check_feasible

__all__ = [
    "InfeasiblePlacementError",
    "SegmentDistribution",
    "NlrReport",
    "collected_distribution",
    "expected_nlr",
    "expected_nlr_monte_carlo",
    "lower_bound_nlr",
    "transfer_expectation_table",
    "MC_BLOCK",
]

# samples per RNG substream; substream b is seeded with (seed, b)
MC_BLOCK = 1024


class InfeasiblePlacementError(ValueError):
    """The placement violates a cache, budget or level constraint."""


@dataclass(frozen=True)
class SegmentDistribution:
    """Law of the segments a user collects for one file.

    ``mass_below[b] = P(S = b)`` for ``b < S_rec``; everything at or above
    the recovery threshold is lumped into ``mass_at_or_above``.
    """

    mass_below: np.ndarray
    mass_at_or_above: float

    def total(self) -> float:
        return math.fsum(self.mass_below) + self.mass_at_or_above


@dataclass(frozen=True)
class NlrReport:
    total: float
    per_user: np.ndarray
    per_pair: Optional[np.ndarray] = None


def _placement_array(scenario: Scenario, placement) -> np.ndarray:
    x = placement.counts if isinstance(placement, Placement) else np.asarray(placement, dtype=np.int64)
    problems = check_feasible(scenario, x)
    if problems:
        raise InfeasiblePlacementError(f"placement is infeasible: {problems[:3]}")
    return x


def _check_window(T):
    if not (T >= 0 and math.isfinite(T)):
        raise ValueError(f"window T must be finite and nonnegative, got {T!r}")


def collected_distribution(scenario: Scenario, placement, T: float, f: int, i: int) -> SegmentDistribution:
    """Distribution of segments of file ``f`` collected by user ``i`` within ``T``.

    Neighbours are convolved in ascending user index; after each step the
    mass at or above ``S_rec`` is merged into a single overflow bin.
    """
    _check_window(T)
    x = _placement_array(scenario, placement)
    s_rec = int(scenario.recover_segments[f])
    B = scenario.contact_budget
    dist = [0.0] * (s_rec + 1)
    dist[0] = 1.0
    for j in range(scenario.num_users):
        if j == i or x[f, j] == 0:
            continue
        law = transfer_distribution(scenario.contact_rate[i, j] * T, B, int(x[f, j]))
        new = [0.0] * (s_rec + 1)
        for a, pa in enumerate(dist):
            if pa == 0.0:
                continue
            for v, pv in zip(law.support, law.mass):
                new[min(a + v, s_rec)] += pa * pv
        dist = new
    own = int(x[f, i])
    shifted = [0.0] * (s_rec + 1)
    for a, pa in enumerate(dist):
        shifted[min(a + own, s_rec)] += pa
    return SegmentDistribution(np.array(shifted[:s_rec]), float(shifted[s_rec]))


def _assemble(scenario: Scenario, r: np.ndarray, detail: bool) -> NlrReport:
    per_user = (scenario.popularity * r).sum(axis=0)
    total = float(per_user.mean())
    return NlrReport(min(max(total, 0.0), 1.0), per_user, r if detail else None)


def _shift_into(out, dist, shift, weight, s_rec, cols, rows):
    idx = np.minimum(cols[None, :] + shift[:, None], s_rec[:, None])
    np.add.at(out, (rows, idx), dist * weight[:, None])


def expected_nlr(scenario: Scenario, placement, T: float, detail: bool = True) -> NlrReport:
    """Exact expected NLR ``R(x, T)``."""
    _check_window(T)
    x = _placement_array(scenario, placement)
    U, F = scenario.num_users, scenario.num_files
    B = scenario.contact_budget
    s_rec = scenario.recover_segments
    width = int(s_rec.max()) + 1
    cols = np.arange(width)
    rows = np.repeat(np.arange(F), width).reshape(F, width)
    m_star = -(-x // B)
    r = np.empty((F, U))
    for i in range(U):
        dist = np.zeros((F, width))
        dist[:, 0] = 1.0
        for j in range(U):
            if j == i:
                continue
            mean = scenario.contact_rate[i, j] * T
            xj = x[:, j]
            if mean == 0.0 or not xj.any():
                continue
            mj = m_star[:, j]
            n_terms = int(mj.max())
            pmf = [poisson_pmf(mean, m) for m in range(n_terms)]
            tails = np.array([max(0.0, 1.0 - math.fsum(pmf[:k])) for k in range(n_terms + 1)])
            new = np.zeros_like(dist)
            for m in range(n_terms):
                weight = np.where(m < mj, pmf[m], 0.0)
                _shift_into(new, dist, np.full(F, B * m), weight, s_rec, cols, rows)
            _shift_into(new, dist, xj, tails[mj], s_rec, cols, rows)
            dist = new
        final = np.zeros_like(dist)
        _shift_into(final, dist, x[:, i], np.ones(F), s_rec, cols, rows)
        deficit = np.clip(s_rec[:, None] - cols[None, :], 0, None)
        r[:, i] = (final * deficit).sum(axis=1) / s_rec
    return _assemble(scenario, r, detail)


def transfer_expectation_table(scenario: Scenario, T: float, max_level: Optional[int] = None) -> np.ndarray:
    """``table[i, j, k] = E[min(B * M_ij, k)]``, zero on the diagonal."""
    _check_window(T)
    U = scenario.num_users
    K = int(scenario.recover_segments.max()) if max_level is None else int(max_level)
    B = scenario.contact_budget
    table = np.zeros((U, U, K + 1))
    for i in range(U):
        for j in range(i + 1, U):
            mean = scenario.contact_rate[i, j] * T
            for k in range(1, K + 1):
                table[i, j, k] = table[j, i, k] = expected_truncated_transfer(mean, B, k)
    return table


def expected_collected(scenario: Scenario, x: np.ndarray, table: np.ndarray) -> np.ndarray:
    """``E[S_fi]`` for every file and user, given a transfer-expectation table."""
    es = x.astype(float)
    for j in range(scenario.num_users):
        es += table[:, j, x[:, j]].T
    return es


def lower_bound_nlr(scenario: Scenario, placement, T: float, detail: bool = True,
                    table: Optional[np.ndarray] = None) -> NlrReport:
    """Lower bound ``R_lb(x, T)`` on the expected NLR."""
    x = _placement_array(scenario, placement)
    if table is None:
        table = transfer_expectation_table(scenario, T)
    s_rec = scenario.recover_segments[:, None]
    es = expected_collected(scenario, x, table)
    r = np.maximum(s_rec - es, 0.0) / s_rec
    return _assemble(scenario, r, detail)


def _mc_block(scenario, x, T, seed, block, n):
    rng = np.random.default_rng([seed, block])
    U = scenario.num_users
    iu, ju = np.triu_indices(U, k=1)
    means = scenario.contact_rate[iu, ju] * T
    draws = rng.poisson(means, size=(n, means.size))
    M = np.zeros((n, U, U), dtype=np.int64)
    M[:, iu, ju] = draws
    M[:, ju, iu] = draws
    B = scenario.contact_budget
    # got[n, f, i, j] = min(B * M_ij, x_fj)
    got = np.minimum(B * M[:, None, :, :], x[None, :, None, :])
    S = x[None, :, :] + got.sum(axis=3)
    s_rec = scenario.recover_segments[None, :, None]
    r = np.maximum(s_rec - S, 0) / s_rec
    return (scenario.popularity[None] * r).sum(axis=1).mean(axis=1)


def expected_nlr_monte_carlo(scenario: Scenario, placement, T: float, samples: int,
                             seed: int = 0, workers: int = 1) -> Tuple[float, float]:
    """Monte Carlo estimate of ``R(x, T)`` and its standard error.

    Samples are drawn in fixed blocks of :data:`MC_BLOCK`, block ``b`` from
    the generator seeded with ``(seed, b)``, so the estimate does not depend
    on ``workers``.
    """
    _check_window(T)
    if samples < 1:
        raise ValueError("samples must be positive")
    x = _placement_array(scenario, placement)
    n_blocks = -(-samples // MC_BLOCK)
    sizes = [min(MC_BLOCK, samples - b * MC_BLOCK) for b in range(n_blocks)]

    def run(b):
        return _mc_block(scenario, x, T, seed, b, sizes[b])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    values = np.concatenate(parts)
    estimate = float(values.mean())
    if samples == 1:
        return estimate, 0.0
    stderr = float(values.std(ddof=1) / math.sqrt(samples))
    return estimate, stderr
