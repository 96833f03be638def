"""Delay search: bisection lower bound, ESA forward search, and baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .milp import EXACT, RELAX_ROUND, MilpSolution, SolverError, build_anocp, optimize_lower_bound, solve_lp
from .model import Placement, Scenario, SearchParams, check_feasible
from .nlr import expected_nlr, lower_bound_nlr, transfer_expectation_table

__all__ = [
    "FEASIBILITY_SLACK",
    "SolveOutcome",
    "SearchError",
    "BisectionResult",
    "bisect_threshold",
    "LowerBoundSolver",
    "bisect_lower_bound",
    "esa",
    "baseline_placement",
    "baseline_delay",
]

FEASIBILITY_SLACK = 1e-9

OK = "ok"
INFEASIBLE = "infeasible"
INFEASIBLE_AT_TMAX = "infeasible-at-t-max"


class SearchError(RuntimeError):
    """An inner solve failed; ``window`` is the T at which it happened."""

    def __init__(self, message, window):
        super().__init__(f"{message} (at T={window!r})")
        self.window = window


@dataclass
class SolveOutcome:
    """A delay together with the placement that achieves it.

    ``status`` is ``"ok"``, ``"infeasible"`` (even ``t_max`` cannot meet
    the NLR limit) or ``"infeasible-at-t-max"`` (ESA ran out of step).
    ``feasible`` reports whether the exact NLR of ``placement`` at
    ``delay`` is within the limit.
    """

    delay: float
    placement: Placement
    exact_nlr: float
    lb_nlr: float
    feasible: bool
    method: str
    status: str = OK
    iterations: int = 0
    solver_calls: int = 0
    halvings: int = 0
    stats: Dict[str, float] = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == OK


def _outcome(scenario, placement, T, method, status=OK, **kw) -> SolveOutcome:
    exact = expected_nlr(scenario, placement, T, detail=False).total
    lb = lower_bound_nlr(scenario, placement, T, detail=False).total
    return SolveOutcome(
        delay=float(T), placement=placement, exact_nlr=exact, lb_nlr=lb,
        feasible=exact <= scenario.nlr_limit + FEASIBILITY_SLACK, method=method, status=status, **kw,
    )


@dataclass
class BisectionResult:
    status: str
    window: Optional[float]
    lower: float
    upper: float
    probes: int
    endpoint_calls: int
    trace: List[Tuple[float, bool]]


def bisect_threshold(meets: Callable[[float], bool], t_min: float, t_max: float, tol: float,
                     pick: str = "last") -> BisectionResult:
    """Find where a monotone predicate switches from False to True.

    ``meets(T)`` must be False below some threshold and True above it.
    Both endpoints are checked first: False at ``t_max`` is reported as
    infeasible, True at ``t_min`` returns ``t_min``. Otherwise the bracket
    is halved until its width is at most ``tol``; ``pick="last"`` returns
    the last midpoint probed and ``pick="upper"`` the upper end of the final
    bracket (a point where the predicate holds).
    """
    trace = []
    ok_hi = meets(t_max)
    trace.append((t_max, ok_hi))
    if not ok_hi:
        return BisectionResult(INFEASIBLE, None, t_min, t_max, 0, 1, trace)
    ok_lo = meets(t_min)
    trace.append((t_min, ok_lo))
    if ok_lo:
        return BisectionResult(OK, t_min, t_min, t_min, 0, 2, trace)
    lo, hi = t_min, t_max
    mid = hi
    probes = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok = meets(mid)
        trace.append((mid, ok))
        probes += 1
        if ok:
            hi = mid
        else:
            lo = mid
    window = mid if pick == "last" else hi
    return BisectionResult(OK, window, lo, hi, probes, 2, trace)


class LowerBoundSolver:
    """Memoized ``min_x R_lb(x, T)`` for one scenario.

    :meth:`meets` answers ``R*_lb(T) <= R'`` exactly but cheaply where it
    can: a placement already seen with ``R_lb <= R'`` at ``T`` proves yes,
    an LP relaxation bound above ``R'`` proves no, and only otherwise is the
    integer program solved. If that solve stops at its node limit, the
    answer is no only when its certified bound exceeds ``R'``, so the
    bisection still returns a lower bound on the delay. The relax-round
    method has no such shortcut; its answer is whatever the rounded
    placement achieves.
    """

    def __init__(self, scenario: Scenario, method: str = EXACT, seed=0, **solver_kw):
        self.scenario = scenario
        self.method = method
        self.seed = seed
        self.solver_kw = solver_kw
        self.cache: Dict[float, MilpSolution] = {}
        self.seen: List[Placement] = [Placement.zeros(scenario)]
        self.solves = 0
        self.lp_solves = 0
        self.shortcuts = 0

    def solve(self, T: float) -> MilpSolution:
        T = float(T)
        if T not in self.cache:
            try:
                sol = optimize_lower_bound(self.scenario, T, self.method, seed=self.seed, **self.solver_kw)
            except SolverError as exc:
                raise SearchError(str(exc), T) from exc
            self.cache[T] = sol
            self.solves += 1
            if sol.placement not in self.seen:
                self.seen.append(sol.placement)
        return self.cache[T]

    def value(self, T: float) -> float:
        return self.solve(T).objective

    def meets(self, T: float) -> bool:
        limit = self.scenario.nlr_limit + FEASIBILITY_SLACK
        T = float(T)
        if self.method != EXACT:
            return self.value(T) <= limit
        if T in self.cache:
            sol = self.cache[T]
            return (sol.objective if sol.optimal else sol.bound) <= limit
        table = transfer_expectation_table(self.scenario, T)
        for p in self.seen:
            if lower_bound_nlr(self.scenario, p, T, detail=False, table=table).total <= limit:
                self.shortcuts += 1
                return True
        model = build_anocp(self.scenario, T)
        lp = solve_lp(model, self.solver_kw.get("lp_method", "auto"))
        self.lp_solves += 1
        if lp.optimal and lp.objective > limit:
            self.shortcuts += 1
            return False
        sol = self.solve(T)
        return (sol.objective if sol.optimal else sol.bound) <= limit


def bisect_lower_bound(scenario: Scenario, params: SearchParams, method: str = EXACT, seed=0,
                       oracle: Optional[Callable[[float], Tuple[float, Placement]]] = None,
                       **solver_kw) -> SolveOutcome:
    """Bisection on ``T`` for the smallest window whose optimal bound meets ``R'``.

    With ``method="exact"`` this yields the delay lower bound; with
    ``"relax-round"`` the rounded counterpart used to seed the ESA. An
    ``oracle(T) -> (value, placement)`` replaces the solver entirely.
    The returned outcome carries ``status="infeasible"`` when even
    ``t_max`` fails, with the placement found at ``t_max``.
    """
    label = "lower-bound" if method == EXACT else "lower-bound-rr"
    if oracle is not None:
        memo = {}

        def lookup(T):
            if T not in memo:
                memo[T] = oracle(T)
            return memo[T]

        meets = lambda T: lookup(T)[0] <= scenario.nlr_limit + FEASIBILITY_SLACK
        place = lambda T: lookup(T)[1]
        calls = lambda: len(memo)
    else:
        solver = LowerBoundSolver(scenario, method, seed, **solver_kw)
        meets = solver.meets
        place = lambda T: solver.solve(T).placement
        calls = lambda: solver.solves

    res = bisect_threshold(meets, params.t_min, params.t_max, params.tolerance)
    stats = {"probes": res.probes, "endpoint_calls": res.endpoint_calls}
    if oracle is None:
        stats.update(lp_solves=solver.lp_solves, shortcuts=solver.shortcuts)
    if res.status == INFEASIBLE:
        placement = place(params.t_max)
        return _outcome(scenario, placement, params.t_max, label, INFEASIBLE,
                        iterations=res.probes, solver_calls=calls(), stats=stats)
    placement = place(res.window)
    return _outcome(scenario, placement, res.window, label, iterations=res.probes,
                    solver_calls=calls(), stats=stats)


def esa(scenario: Scenario, params: SearchParams, start: SolveOutcome, method: str = EXACT,
        seed=0, **solver_kw) -> SolveOutcome:
    """Forward search from ``start`` until the exact NLR meets ``R'``.

    Each iteration advances ``T`` by the step; a step past ``t_max`` is
    undone and the step halved. The placement is then re-optimized at the
    current ``T`` with ``method``. The loop stops once the exact NLR is
    within the limit or the step is no longer above the tolerance.
    """
    label = "esa-ilp" if method == EXACT else "esa-rra"
    if start.status == INFEASIBLE:
        return SolveOutcome(start.delay, start.placement, start.exact_nlr, start.lb_nlr, False,
                            label, INFEASIBLE)
    solver = LowerBoundSolver(scenario, method, seed, **solver_kw)
    limit = scenario.nlr_limit + FEASIBILITY_SLACK
    T = float(start.delay)
    x = start.placement
    step = float(params.step)
    nlr = expected_nlr(scenario, x, T, detail=False).total
    iterations = halvings = 0
    while nlr > limit and step > params.tolerance:
        previous = T
        T = previous + step
        if T > params.t_max:
            T = previous
            step /= 2.0
            halvings += 1
        x = solver.solve(T).placement
        nlr = expected_nlr(scenario, x, T, detail=False).total
        iterations += 1
    status = OK if nlr <= limit else INFEASIBLE_AT_TMAX
    out = _outcome(scenario, x, T, label, status, iterations=iterations,
                   solver_calls=solver.solves, halvings=halvings)
    out.stats["start_delay"] = float(start.delay)
    return out


def baseline_placement(scenario: Scenario, kind: str, seed=0) -> Placement:
    """Mobility-unaware placements used for comparison.

    ``"popularity"``: users in ascending index fill their caches with the
    files they request most, taking as many segments of each as capacity,
    the file's remaining budget and its recovery threshold allow.
    ``"random"``: repeatedly add one segment at a uniformly chosen
    (file, user) cell that can still take one, until none can.
    """
    F, U = scenario.shape
    S = scenario.recover_segments
    cap = scenario.cache_capacity.astype(np.int64).copy()
    budget = scenario.max_segments.astype(np.int64).copy()
    x = np.zeros((F, U), dtype=np.int64)
    if kind == "popularity":
        for i in range(U):
            order = np.argsort(-scenario.popularity[:, i], kind="stable")
            for f in order:
                if cap[i] == 0:
                    break
                take = int(min(S[f], cap[i], budget[f]))
                if take > 0:
                    x[f, i] = take
                    cap[i] -= take
                    budget[f] -= take
        return Placement(x)
    if kind == "random":
        rng = np.random.default_rng(seed)
        while True:
            open_cells = (x < S[:, None]) & (cap[None, :] > 0) & (budget[:, None] > 0)
            cells = np.argwhere(open_cells)
            if cells.size == 0:
                return Placement(x)
            f, i = cells[rng.integers(len(cells))]
            x[f, i] += 1
            cap[i] -= 1
            budget[f] -= 1
    raise ValueError(f"unknown baseline kind {kind!r}")


def baseline_delay(scenario: Scenario, placement: Placement, params: SearchParams,
                   label: str = "baseline") -> SolveOutcome:
    """Smallest ``T`` (within tolerance) at which a fixed placement meets ``R'``.

    Relies on the exact NLR being nonincreasing in ``T``.
    """
    problems = check_feasible(scenario, placement)
    if problems:
        raise ValueError(f"placement is infeasible: {problems[:3]}")
    limit = scenario.nlr_limit + FEASIBILITY_SLACK
    meets = lambda T: expected_nlr(scenario, placement, T, detail=False).total <= limit
    res = bisect_threshold(meets, params.t_min, params.t_max, params.tolerance, pick="upper")
    if res.status == INFEASIBLE:
        return _outcome(scenario, placement, params.t_max, label, INFEASIBLE, iterations=res.probes)
    return _outcome(scenario, placement, res.window, label, iterations=res.probes)
