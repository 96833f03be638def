"""Linear programs and a dense two-phase simplex solver.

The solver works on the general form::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lower <= x <= upper          (lower finite)

Fixed variables are substituted out, finite lower bounds shifted to zero and
finite upper bounds become extra rows unless an equality row already implies
them. Dantzig pricing is used until a run of degenerate pivots is seen, after
which the solver switches to Bland's rule for the rest of the solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

__all__ = [
    "LinearProgram",
    "LpSolution",
    "SolverError",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "simplex",
    "solve_lp",
    "LpSession",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
DEGENERATE_LIMIT = 50
AUTO_SIMPLEX_MAX_VARS = 400


class SolverError(RuntimeError):
    """The LP solver failed for numerical reasons or hit its iteration limit."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _as_dense(A, n):
    if A is None:
        return np.zeros((0, n))
    if sparse.issparse(A):
        return A.toarray()
    return np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)


@dataclass
class LinearProgram:
    """A linear program with optional integrality marks.

    Matrices may be dense arrays or scipy sparse matrices; missing row
    blocks are ``None``.
    """

    c: np.ndarray
    A_ub: Optional[object] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[object] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    integrality: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float)
        if self.A_ub is None:
            self.A_ub = np.zeros((0, n))
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.integrality is None:
            self.integrality = np.zeros(n, dtype=bool)
        else:
            self.integrality = np.asarray(self.integrality, dtype=bool)

    @property
    def num_vars(self) -> int:
        return self.c.size

    def residual(self, x: np.ndarray) -> float:
        """Largest violation of any row or bound at ``x``."""
        worst = 0.0
        if self.b_ub.size:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub)))
        if self.b_eq.size:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.upper, initial=0.0)))
        return worst


@dataclass
class LpSolution:
    values: Optional[np.ndarray]
    objective: float
    status: str
    iterations: int = 0
    method: str = "simplex"
    max_violation: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T, r, e):
    T[r] /= T[r, e]
    col = T[:, e].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[r, e] = 1.0


def _iterate(T, basis, n_enter, max_iter, counter):
    """Run simplex pivots on tableau ``T`` until optimal or unbounded."""
    m = T.shape[0] - 1
    bland = False
    degenerate = 0
    while True:
        rc = T[-1, :n_enter]
        if bland:
            neg = np.flatnonzero(rc < -PIVOT_TOL)
            if neg.size == 0:
                return OPTIMAL
            e = int(neg[0])
        else:
            e = int(np.argmin(rc))
            if rc[e] >= -PIVOT_TOL:
                return OPTIMAL
        col = T[:m, e]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED
        rhs = T[pos, -1]
        ratios = rhs / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + PIVOT_TOL * (1.0 + abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        if abs(T[r, e]) < 1e-11:
            raise SolverError("near-singular pivot", row=r, column=e, pivot=float(T[r, e]))
        if best <= PIVOT_TOL:
            degenerate += 1
            if degenerate > DEGENERATE_LIMIT:
                bland = True
        else:
            degenerate = 0
        _pivot(T, r, e)
        basis[r] = e
        rhs_col = T[:m, -1]
        rhs_col[(rhs_col < 0) & (rhs_col > -FEAS_TOL)] = 0.0
        counter[0] += 1
        if counter[0] > max_iter:
            raise SolverError("simplex iteration limit reached", iterations=counter[0])


def simplex(lp: LinearProgram, lower=None, upper=None, max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``lp`` (integrality ignored) with the two-phase tableau simplex."""
    n = lp.num_vars
    lower = lp.lower if lower is None else np.asarray(lower, dtype=float)
    upper = lp.upper if upper is None else np.asarray(upper, dtype=float)
    if not np.all(np.isfinite(lower)):
        raise ValueError("simplex requires finite lower bounds")
    if np.any(upper < lower - FEAS_TOL):
        return LpSolution(None, np.inf, INFEASIBLE)
    A_ub = _as_dense(lp.A_ub, n)
    A_eq = _as_dense(lp.A_eq, n)

    fixed = upper <= lower
    free = np.flatnonzero(~fixed)
    shift = lower.copy()
    shift[fixed] = lower[fixed]
    b_ub = lp.b_ub - A_ub @ shift
    b_eq = lp.b_eq - A_eq @ shift
    A_ub = A_ub[:, free]
    A_eq = A_eq[:, free]
    cap = (upper - lower)[free]
    c = lp.c[free]
    nf = free.size

    # upper-bound rows, skipped when an all-nonnegative equality row implies them
    need = np.isfinite(cap)
    if A_eq.shape[0] and need.any():
        rows_ok = np.all(A_eq >= 0, axis=1) & (b_eq >= 0)
        for j in np.flatnonzero(need):
            coef = A_eq[:, j]
            mask = rows_ok & (coef > 0)
            if mask.any() and np.min(b_eq[mask] / coef[mask]) <= cap[j] + FEAS_TOL:
                need[j] = False
    bnd = np.flatnonzero(need)
    A_bnd = np.zeros((bnd.size, nf))
    A_bnd[np.arange(bnd.size), bnd] = 1.0
    A_le = np.vstack([A_ub, A_bnd])
    b_le = np.concatenate([b_ub, cap[bnd]])

    m_le, m_eq = A_le.shape[0], A_eq.shape[0]
    m = m_le + m_eq
    if m == 0:
        if np.any(c < -PIVOT_TOL):
            return LpSolution(None, -np.inf, UNBOUNDED)
        x = lower.copy()
        x[fixed] = lower[fixed]
        return LpSolution(x, float(lp.c @ x), OPTIMAL)

    # columns: structural | slacks | artificials
    flip_le = b_le < 0
    flip_eq = b_eq < 0
    need_art = np.concatenate([flip_le, np.ones(m_eq, dtype=bool)])
    art_rows = np.flatnonzero(need_art)
    n_slack = m_le
    n_art = art_rows.size
    N = nf + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m_le, :nf] = A_le
    T[:m_le, nf:nf + n_slack] = np.eye(m_le)
    T[:m_le, -1] = b_le
    T[m_le:m, :nf] = A_eq
    T[m_le:m, -1] = b_eq
    sign = np.where(np.concatenate([flip_le, flip_eq]), -1.0, 1.0)
    T[:m] *= sign[:, None]
    basis = np.empty(m, dtype=np.int64)
    basis[:m_le] = nf + np.arange(m_le)
    for a, r in enumerate(art_rows):
        T[r, nf + n_slack + a] = 1.0
        basis[r] = nf + n_slack + a

    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    counter = [0]
    first_art = nf + n_slack

    if n_art:
        T[-1, :] = 0.0
        T[-1, first_art:N] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        _iterate(T, basis, first_art, max_iter, counter)
        infeas = -T[-1, -1]
        scale = 1.0 + float(np.max(np.abs(T[:m, -1]), initial=0.0))
        if infeas > FEAS_TOL * scale:
            return LpSolution(None, np.inf, INFEASIBLE, iterations=counter[0])
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= first_art:
                cand = np.flatnonzero(np.abs(T[r, :first_art]) > PIVOT_TOL)
                if cand.size:
                    e = int(cand[0])
                    _pivot(T, r, e)
                    basis[r] = e
                else:
                    keep[r] = False
        keep_rows = np.concatenate([np.flatnonzero(keep), [m]])
        T = T[keep_rows][:, list(range(first_art)) + [N]]
        basis = basis[keep]
        m = basis.size

    cost = np.zeros(T.shape[1] - 1)
    cost[:nf] = c
    T[-1, :-1] = cost
    T[-1, -1] = 0.0
    T[-1] -= cost[basis] @ T[:m]
    status = _iterate(T, basis, first_art, max_iter, counter)
    if status == UNBOUNDED:
        return LpSolution(None, -np.inf, UNBOUNDED, iterations=counter[0])

    z = np.zeros(T.shape[1] - 1)
    z[basis] = T[:m, -1]
    x = lower.copy()
    x[free] = lower[free] + z[:nf]
    viol = lp.residual(x) if lower is lp.lower and upper is lp.upper else _residual(lp, x, lower, upper)
    if viol > 1e-6:
        raise SolverError("simplex solution violates constraints", max_violation=viol,
                          iterations=counter[0])
    return LpSolution(x, float(lp.c @ x), OPTIMAL, iterations=counter[0], max_violation=viol)


def _residual(lp, x, lower, upper):
    worst = 0.0
    if lp.b_ub.size:
        worst = max(worst, float(np.max(lp.A_ub @ x - lp.b_ub)))
    if lp.b_eq.size:
        worst = max(worst, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))))
    worst = max(worst, float(np.max(lower - x, initial=0.0)), float(np.max(x - upper, initial=0.0)))
    return worst


def _highs(lp: LinearProgram, lower, upper) -> LpSolution:
    from scipy.optimize import linprog

    kwargs = {}
    if lp.b_ub.size:
        kwargs.update(A_ub=lp.A_ub, b_ub=lp.b_ub)
    if lp.b_eq.size:
        kwargs.update(A_eq=lp.A_eq, b_eq=lp.b_eq)
    hi = np.where(np.isfinite(upper), upper, None)
    res = linprog(lp.c, bounds=list(zip(lower, hi)), method="highs", **kwargs)
    if res.status == 0:
        x = np.clip(res.x, lower, upper)
        return LpSolution(x, float(lp.c @ x), OPTIMAL, iterations=int(res.nit), method="highs",
                          max_violation=_residual(lp, x, lower, upper))
    if res.status == 2:
        return LpSolution(None, np.inf, INFEASIBLE, method="highs")
    if res.status == 3:
        return LpSolution(None, -np.inf, UNBOUNDED, method="highs")
    raise SolverError(f"HiGHS failed: {res.message}", status=res.status)


def solve_lp(lp: LinearProgram, method: str = "auto", lower=None, upper=None) -> LpSolution:
    """Solve the continuous relaxation of ``lp``.

    ``method`` is ``"simplex"`` (the in-house tableau solver), ``"highs"``
    (scipy's HiGHS) or ``"auto"``, which uses the simplex for models with at
    most ``AUTO_SIMPLEX_MAX_VARS`` variables and HiGHS above that.
    ``lower``/``upper`` override the model's bounds (used by branching).
    """
    lower = lp.lower if lower is None else np.asarray(lower, dtype=float)
    upper = lp.upper if upper is None else np.asarray(upper, dtype=float)
    if method == "auto":
        method = "simplex" if lp.num_vars <= AUTO_SIMPLEX_MAX_VARS else "highs"
    if method == "simplex":
        return simplex(lp, lower, upper)
    if method == "highs":
        if np.any(upper < lower - FEAS_TOL):
            return LpSolution(None, np.inf, INFEASIBLE, method="highs")
        return _highs(lp, lower, upper)
    raise ValueError(f"unknown LP method {method!r}")


class LpSession:
    """A persistent HiGHS model re-solved under changing column bounds.

    Branch-and-bound children differ from their parent in a few bounds, so
    keeping the model (and its basis) alive turns each node solve into a
    short dual-simplex warm start.
    """

    def __init__(self, lp: LinearProgram):
        import highspy

        self.lp = lp
        n = lp.num_vars
        blocks = [sparse.csr_matrix(m) for m, b in ((lp.A_ub, lp.b_ub), (lp.A_eq, lp.b_eq)) if b.size]
        A = sparse.vstack(blocks).tocsc() if blocks else sparse.csc_matrix((0, n))
        model = highspy.HighsLp()
        model.num_col_ = n
        model.num_row_ = A.shape[0]
        model.col_cost_ = lp.c
        model.col_lower_ = lp.lower
        model.col_upper_ = np.where(np.isfinite(lp.upper), lp.upper, highspy.kHighsInf)
        model.row_lower_ = np.r_[np.full(lp.b_ub.size, -highspy.kHighsInf), lp.b_eq]
        model.row_upper_ = np.r_[lp.b_ub, lp.b_eq]
        model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        model.a_matrix_.num_col_ = n
        model.a_matrix_.num_row_ = A.shape[0]
        model.a_matrix_.start_ = A.indptr
        model.a_matrix_.index_ = A.indices
        model.a_matrix_.value_ = A.data
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.passModel(model)
        self._status = highspy.HighsModelStatus
        self._inf = highspy.kHighsInf
        self._lower = lp.lower.copy()
        self._upper = lp.upper.copy()

    def solve(self, lower=None, upper=None) -> LpSolution:
        lower = self.lp.lower if lower is None else np.asarray(lower, dtype=float)
        upper = self.lp.upper if upper is None else np.asarray(upper, dtype=float)
        if np.any(upper < lower - FEAS_TOL):
            return LpSolution(None, np.inf, INFEASIBLE, method="highs")
        changed = np.flatnonzero((lower != self._lower) | (upper != self._upper))
        if changed.size:
            hi = np.where(np.isfinite(upper[changed]), upper[changed], self._inf)
            self._h.changeColsBounds(changed.size, changed.astype(np.int32), lower[changed], hi)
            self._lower[changed] = lower[changed]
            self._upper[changed] = upper[changed]
        self._h.run()
        status = self._h.getModelStatus()
        if status == self._status.kOptimal:
            x = np.clip(np.asarray(self._h.getSolution().col_value), lower, upper)
            return LpSolution(x, float(self.lp.c @ x), OPTIMAL,
                              iterations=int(self._h.getInfo().simplex_iteration_count), method="highs",
                              max_violation=_residual(self.lp, x, lower, upper))
        if status == self._status.kInfeasible:
            return LpSolution(None, np.inf, INFEASIBLE, method="highs")
        if status in (self._status.kUnbounded, self._status.kUnboundedOrInfeasible):
            return LpSolution(None, -np.inf, UNBOUNDED, method="highs")
        raise SolverError(f"HiGHS failed: {self._h.modelStatusToString(status)}", status=str(status))
