"""Randomized rounding of the relaxed level indicators, with greedy repair."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..model import Placement, Scenario
from ..nlr import transfer_expectation_table
from .anocp import variable_layout
from .lp import LpSolution

__all__ = ["sample_levels", "repair_placement", "fill_placement", "unit_deltas", "round_relaxation", "file_bound_terms"]


def sample_levels(values: np.ndarray, scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Draw one level per (file, user) with probabilities given by the relaxed ``y``.

    One uniform is consumed per pair, in file-major then user order.
    """
    layout = variable_layout(scenario)
    F, U = scenario.shape
    u = rng.random((F, U))
    x = np.zeros((F, U), dtype=np.int64)
    for f in range(F):
        n = int(layout.levels[f]) + 1
        for i in range(U):
            s = int(layout.y_start[f, i])
            p = np.clip(values[s:s + n], 0.0, None)
            cdf = np.cumsum(p)
            k = int(np.searchsorted(cdf, u[f, i] * cdf[-1], side="right"))
            x[f, i] = min(k, n - 1)
    return x


def file_bound_terms(scenario: Scenario, column: np.ndarray, f: int, table: np.ndarray) -> float:
    """Contribution of file ``f`` with per-user counts ``column`` to ``R_lb``."""
    U = scenario.num_users
    s = scenario.recover_segments[f]
    es = column.astype(float) + table[:, np.arange(U), column].sum(axis=1)
    return float(np.sum(scenario.popularity[f] * np.maximum(s - es, 0.0)) / (s * U))


def repair_placement(scenario: Scenario, x: np.ndarray, T: float,
                     table: Optional[np.ndarray] = None) -> np.ndarray:
    """Decrement counts until cache and budget limits hold.

    Each step removes one segment from a pair that sits in a violated row,
    choosing the pair whose removal raises ``R_lb`` the least (ties go to
    the lowest file index, then the lowest user index).
    """
    x = np.array(x, dtype=np.int64, copy=True)
    if table is None:
        table = transfer_expectation_table(scenario, T)
    x = np.minimum(x, scenario.recover_segments[:, None])
    while True:
        over_user = x.sum(axis=0) > scenario.cache_capacity
        over_file = x.sum(axis=1) > scenario.max_segments
        if not over_user.any() and not over_file.any():
            return x
        best = None
        base = {}
        for f, i in np.argwhere(x > 0):
            if not (over_user[i] or over_file[f]):
                continue
            if f not in base:
                base[f] = file_bound_terms(scenario, x[f], f, table)
            col = x[f].copy()
            col[i] -= 1
            delta = file_bound_terms(scenario, col, f, table) - base[f]
            if best is None or delta < best[0]:
                best = (delta, f, i)
        _, f, i = best
        x[f, i] -= 1


def unit_deltas(scenario: Scenario, column: np.ndarray, f: int, table: np.ndarray, step: int) -> np.ndarray:
    """Change in file ``f``'s ``R_lb`` term when one user's count moves by ``step``.

    Entry ``i`` is the change for ``column[i] += step``; moves that leave
    ``0..S_rec`` are ``inf``.
    """
    U = scenario.num_users
    s = scenario.recover_segments[f]
    users = np.arange(U)
    col = column.astype(np.int64)
    es = col + table[:, users, col].sum(axis=1)
    target = col + step
    ok = (target >= 0) & (target <= s)
    t = np.clip(target, 0, table.shape[2] - 1)
    # es_new[u, i]: expected count at u after moving user i's count
    es_new = es[:, None] + table[:, users, t] - table[:, users, col] + step * np.eye(U)
    w = scenario.popularity[f]
    before = np.sum(w * np.maximum(s - es, 0.0))
    after = (w[:, None] * np.maximum(s - es_new, 0.0)).sum(axis=0)
    return np.where(ok, (after - before) / (s * U), np.inf)


def fill_placement(scenario: Scenario, x: np.ndarray, T: float,
                   table: Optional[np.ndarray] = None, swaps: bool = True) -> np.ndarray:
    """Local search that polishes a feasible placement.

    Segments are added one at a time where they lower ``R_lb`` the most
    while every limit still holds. With ``swaps``, a segment is then moved
    between two files in the same cache whenever that lowers ``R_lb``, and
    filling resumes. Each step takes the best move (ties: lowest file, then
    lowest user); the search stops when no move improves by more than
    ``1e-12``.
    """
    x = np.array(x, dtype=np.int64, copy=True)
    if table is None:
        table = transfer_expectation_table(scenario, T)
    F, U = scenario.shape
    add = np.array([unit_deltas(scenario, x[f], f, table, +1) for f in range(F)])
    rem = np.array([unit_deltas(scenario, x[f], f, table, -1) for f in range(F)])

    def refresh(f):
        add[f] = unit_deltas(scenario, x[f], f, table, +1)
        rem[f] = unit_deltas(scenario, x[f], f, table, -1)

    while True:
        room_user = scenario.cache_capacity - x.sum(axis=0) > 0
        room_file = scenario.max_segments - x.sum(axis=1) > 0
        gain = np.where(room_file[:, None] & room_user[None, :], add, np.inf)
        k = int(np.argmin(gain))
        if gain.flat[k] < -1e-12:
            f, i = divmod(k, U)
            x[f, i] += 1
            refresh(f)
            continue
        if not swaps:
            return x
        best = None
        addable = np.where(room_file[:, None], add, np.inf)
        for i in range(U):
            held = np.flatnonzero(x[:, i] > 0)
            if held.size == 0:
                continue
            order = np.argsort(addable[:, i], kind="stable")[:2]
            for f in held:
                g = order[0] if order[0] != f else order[1] if order.size > 1 else None
                if g is None:
                    continue
                d = rem[f, i] + addable[g, i]
                if d < -1e-12 and (best is None or d < best[0]):
                    best = (d, f, g, i)
        if best is None:
            return x
        _, f, g, i = best
        x[f, i] -= 1
        x[g, i] += 1
        refresh(f)
        refresh(g)


def round_relaxation(lp_solution: LpSolution, scenario: Scenario, T: float, seed,
                     table: Optional[np.ndarray] = None) -> Placement:
    """Round an optimal relaxed solution to a feasible placement.

    Levels are sampled per pair with the relaxed indicator values as
    probabilities, then :func:`repair_placement` restores feasibility.
    Deterministic for a given ``seed``.
    """
    if not lp_solution.optimal:
        raise ValueError(f"cannot round a {lp_solution.status} LP solution")
    rng = np.random.default_rng(seed)
    x = sample_levels(lp_solution.values, scenario, rng)
    return Placement(repair_placement(scenario, x, T, table=table))
