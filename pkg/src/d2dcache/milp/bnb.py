"""Branch-and-bound over LP relaxations."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model import Placement
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LpSession, SolverError, solve_lp

__all__ = ["MilpSolution", "solve_ilp", "solve_ilp_highs", "OBJECTIVE_TOL", "INTEGRALITY_TOL"]

OBJECTIVE_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
DEFAULT_NODE_LIMIT = 10**6
HIGHS_OBJECTIVE_SCALE = 1e4


@dataclass
class MilpSolution:
    """Result of an integer solve.

    ``gap`` is incumbent minus best remaining bound (zero when proven
    optimal), so ``objective - gap`` is a certified lower bound on the
    optimum. ``placement`` is set for placement models only.
    """

    values: Optional[np.ndarray]
    objective: float
    node_count: int
    gap: float
    optimal: bool
    status: str = OPTIMAL
    placement: Optional[Placement] = None
    method: str = "exact"
    lp_bound: float = -math.inf

    @property
    def bound(self) -> float:
        """Best proven lower bound on the optimal objective."""
        return self.objective - self.gap


def _integral_value(lp, values, polish=False):
    """Round the integer columns; for placement models also reset ``N'`` to its minimum.

    ``polish`` additionally spends leftover cache space greedily.
    """
    v = values.copy()
    mask = lp.integrality
    v[mask] = np.round(v[mask])
    if hasattr(lp, "layout"):
        placement = lp.placement_of(v)
        if polish:
            from .rounding import fill_placement

            placement = Placement(fill_placement(lp.scenario, placement.counts, lp.window, lp.transfer_table))
        obj = lp.objective_of(placement)
        v = lp.layout.from_placement(placement, lp.shortfall(placement).ravel())
        return v, obj
    return v, float(lp.c @ v)


def _most_fractional(values, mask):
    idx = np.flatnonzero(mask)
    frac = np.abs(values[idx] - np.round(values[idx]))
    k = int(np.argmax(frac))
    if frac[k] <= INTEGRALITY_TOL:
        return None
    return int(idx[k])


def _initial_incumbent(lp, lp_method, root_values):
    if not hasattr(lp, "layout"):
        return None
    from .rounding import fill_placement, repair_placement

    scenario = lp.scenario
    zero = Placement.zeros(scenario)
    candidates = [zero]
    if root_values is not None:
        guess = lp.placement_of(root_values).counts
        fixed = repair_placement(scenario, guess, lp.window, table=lp.transfer_table)
        candidates.append(Placement(fill_placement(scenario, fixed, lp.window, table=lp.transfer_table)))
    best = None
    for p in candidates:
        obj = lp.objective_of(p)
        if best is None or obj < best[1] - OBJECTIVE_TOL:
            best = (lp.layout.from_placement(p, lp.shortfall(p).ravel()), obj)
    return best


def solve_ilp(lp: LinearProgram, lp_method: str = "auto", node_limit: int = DEFAULT_NODE_LIMIT,
              heuristic: bool = True) -> MilpSolution:
    """Minimize ``lp`` with its integer columns restricted to integers.

    Nodes are explored depth first; among nodes of equal depth the one with
    the lowest LP bound goes first. The branching variable is the most
    fractional integer column (lowest index on ties). A node whose bound is
    not below the incumbent by more than :data:`OBJECTIVE_TOL` is pruned.
    If ``node_limit`` LP solves are exceeded the best incumbent is returned
    with ``optimal=False`` and a certified bound.

    With ``lp_method`` ``"auto"`` or ``"highs"`` node LPs are warm-started
    on one persistent HiGHS model; ``"simplex"`` solves every node from
    scratch with the in-house tableau simplex. With ``heuristic``
    the search starts from the better of the empty placement and the
    repaired, greedily filled argmax of the root relaxation, and improved
    incumbents are filled the same way.
    """
    mask = lp.integrality
    lower0 = lp.lower.copy()
    upper0 = lp.upper.copy()
    mask_int = mask & np.isfinite(lower0)
    lower0[mask_int] = np.ceil(lower0[mask_int] - INTEGRALITY_TOL)
    upper0[mask & np.isfinite(upper0)] = np.floor(upper0[mask & np.isfinite(upper0)] + INTEGRALITY_TOL)

    if lp_method in ("auto", "highs"):
        node_lp = LpSession(lp).solve
    else:
        node_lp = lambda lo, hi: solve_lp(lp, lp_method, lo, hi)

    root = node_lp(lower0, upper0)
    nodes = 1
    if root.status == INFEASIBLE:
        return MilpSolution(None, math.inf, nodes, 0.0, True, status=INFEASIBLE)
    if root.status == UNBOUNDED:
        return MilpSolution(None, -math.inf, nodes, 0.0, False, status=UNBOUNDED)

    incumbent = _initial_incumbent(lp, lp_method, root.values if heuristic else None)
    inc_values, inc_obj = (incumbent if incumbent is not None else (None, math.inf))

    def offer(values):
        nonlocal inc_values, inc_obj
        v, obj = _integral_value(lp, values)
        if obj < inc_obj - OBJECTIVE_TOL and heuristic:
            v, obj = _integral_value(lp, values, polish=True)
        if obj < inc_obj - OBJECTIVE_TOL or inc_values is None:
            inc_values, inc_obj = v, obj

    seq = itertools.count()
    heap = []
    j = _most_fractional(root.values, mask)
    if j is None:
        offer(root.values)
    else:
        heapq.heappush(heap, (0, root.objective, next(seq), lower0, upper0, root.values))

    exhausted = False
    while heap:
        neg_depth, bound, _, lo, hi, values = heapq.heappop(heap)
        if bound >= inc_obj - OBJECTIVE_TOL:
            continue
        j = _most_fractional(values, mask)
        v = values[j]
        down_hi = hi.copy()
        down_hi[j] = math.floor(v)
        up_lo = lo.copy()
        up_lo[j] = math.ceil(v)
        for clo, chi in ((lo, down_hi), (up_lo, hi)):
            if nodes >= node_limit:
                exhausted = True
                break
            nodes += 1
            child = node_lp(clo, chi)
            if child.status != OPTIMAL or child.objective >= inc_obj - OBJECTIVE_TOL:
                continue
            if _most_fractional(child.values, mask) is None:
                offer(child.values)
            else:
                heapq.heappush(heap, (neg_depth - 1, child.objective, next(seq), clo, chi, child.values))
        if exhausted:
            heapq.heappush(heap, (neg_depth, bound, next(seq), lo, hi, values))
            break

    open_bounds = [b for _, b, *_ in heap if b < inc_obj]
    best_bound = min(open_bounds + [inc_obj])
    best_bound = max(best_bound, root.objective)
    gap = max(inc_obj - best_bound, 0.0) if inc_values is not None else math.inf
    if inc_values is None:
        status = INFEASIBLE if not exhausted else "node_limit"
        return MilpSolution(None, math.inf, nodes, gap, not exhausted, status=status)
    placement = lp.placement_of(inc_values) if hasattr(lp, "layout") else None
    return MilpSolution(inc_values, inc_obj, nodes, gap, not exhausted,
                        status=OPTIMAL if not exhausted else "node_limit",
                        placement=placement, lp_bound=root.objective)


def solve_ilp_highs(lp: LinearProgram, node_limit: Optional[int] = None) -> MilpSolution:
    """Solve with scipy's HiGHS MIP solver.

    With ``node_limit`` the solve may stop early; the incumbent is then
    returned with ``optimal=False`` and HiGHS's dual bound.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    cons = []
    if lp.b_ub.size:
        cons.append(LinearConstraint(lp.A_ub, -np.inf, lp.b_ub))
    if lp.b_eq.size:
        cons.append(LinearConstraint(lp.A_eq, lp.b_eq, lp.b_eq))
    options = {"mip_rel_gap": 0.0}
    if node_limit is not None:
        options["node_limit"] = max(int(node_limit), 1)
    # HiGHS stops at an absolute gap of 1e-6; scaling the objective tightens it
    res = milp(lp.c * HIGHS_OBJECTIVE_SCALE, constraints=cons, integrality=lp.integrality.astype(int),
               bounds=Bounds(lp.lower, lp.upper), options=options)
    if res.x is None or res.status not in (0, 1):
        raise SolverError(f"HiGHS MIP failed: {res.message}", status=res.status)
    v, obj = _integral_value(lp, res.x)
    placement = lp.placement_of(v) if hasattr(lp, "layout") else None
    bound = getattr(res, "mip_dual_bound", None)
    bound = obj if bound is None or res.status == 0 else min(bound / HIGHS_OBJECTIVE_SCALE, obj)
    optimal = res.status == 0
    return MilpSolution(v, obj, int(getattr(res, "mip_node_count", 0) or 0),
                        max(obj - bound, 0.0), optimal, status=OPTIMAL if optimal else "node_limit",
                        placement=placement, method="exact")
