"""Lower-bound placement optimisation: ILP model, LP/ILP solvers, rounding."""

from __future__ import annotations

from ..model import Scenario
from ..nlr import lower_bound_nlr
from .anocp import AnocpModel, VariableLayout, build_anocp, variable_layout, write_lp_format
from .bnb import MilpSolution, solve_ilp, solve_ilp_highs
from .lp import LinearProgram, LpSolution, SolverError, simplex, solve_lp
from .rounding import repair_placement, round_relaxation

__all__ = [
    "AnocpModel",
    "VariableLayout",
    "LinearProgram",
    "LpSolution",
    "MilpSolution",
    "SolverError",
    "build_anocp",
    "variable_layout",
    "write_lp_format",
    "simplex",
    "solve_lp",
    "solve_ilp",
    "solve_ilp_highs",
    "round_relaxation",
    "repair_placement",
    "optimize_lower_bound",
    "EXACT",
    "RELAX_ROUND",
]

EXACT = "exact"
RELAX_ROUND = "relax-round"


def optimize_lower_bound(scenario: Scenario, T: float, method: str = EXACT, seed=0,
                         lp_method: str = "auto", ilp_backend: str = "bnb",
                         node_limit: int = 10**6) -> MilpSolution:
    """Minimize ``R_lb(x, T)`` over feasible placements.

    ``method="exact"`` solves the ILP (``ilp_backend`` ``"bnb"`` for the
    in-house branch-and-bound, ``"highs"`` for scipy's MIP solver), giving
    up after ``node_limit`` nodes with a non-optimal incumbent;
    ``method="relax-round"`` solves the LP relaxation and rounds it with
    ``seed``. The returned ``objective`` is the model's value at the
    returned placement.
    """
    model = build_anocp(scenario, T)
    if method == EXACT:
        if ilp_backend == "bnb":
            sol = solve_ilp(model, lp_method=lp_method, node_limit=node_limit)
        elif ilp_backend == "highs":
            sol = solve_ilp_highs(model, node_limit=node_limit)
        else:
            raise ValueError(f"unknown ILP backend {ilp_backend!r}")
        if sol.placement is None:
            raise SolverError(f"ILP solve returned no placement at T={T!r}", status=sol.status, T=T)
        sol.method = EXACT
        return sol
    if method == RELAX_ROUND:
        lp = solve_lp(model, lp_method)
        if not lp.optimal:
            raise SolverError(f"LP relaxation {lp.status} at T={T!r}", status=lp.status, T=T)
        placement = round_relaxation(lp, scenario, T, seed, table=model.transfer_table)
        obj = model.objective_of(placement)
        values = model.layout.from_placement(placement, model.shortfall(placement).ravel())
        return MilpSolution(values, obj, 1, max(obj - lp.objective, 0.0), False,
                            placement=placement, method=RELAX_ROUND, lp_bound=lp.objective)
    raise ValueError(f"unknown method {method!r}")
