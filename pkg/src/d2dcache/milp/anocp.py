"""Integer linear model of the lower-bound placement problem.

Each (file f, user i) pair gets one binary level indicator ``y[f, i, k]``
per count ``k = 0..S_rec[f]`` (exactly one is set) and a continuous
shortfall variable ``N'[f, i]``. With ``e[i, j, k] = E[min(B M_ij, k)]``
the model is::

    minimize   (1/U) sum_{f,i} P[f, i] N'[f, i] / S_rec[f]
    s.t.       N'[f, i] >= S_rec[f] - sum_{j != i, k} e[i, j, k] y[f, j, k]
                                    - sum_k k y[f, i, k]           (cover)
               N'[f, i] >= 0                                       (bound)
               sum_k y[f, i, k] == 1                               (select)
               sum_{f, k} k y[f, i, k] <= C[i]                     (capacity)
               sum_{i, k} k y[f, i, k] <= S_max[f]                 (budget)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy import sparse

from ..model import Placement, Scenario
from ..nlr import transfer_expectation_table
from .lp import LinearProgram

__all__ = ["VariableLayout", "AnocpModel", "build_anocp", "variable_layout", "write_lp_format"]


@dataclass(frozen=True)
class VariableLayout:
    """Column positions of the level indicators and shortfall variables.

    ``y_start[f, i]`` is the column of ``y[f, i, 0]``; levels of one pair are
    contiguous. ``aux[f, i]`` is the column of ``N'[f, i]``.
    """

    levels: np.ndarray
    y_start: np.ndarray
    aux: np.ndarray
    num_y: int

    @property
    def num_vars(self) -> int:
        return self.num_y + self.aux.size

    def y_index(self, f: int, i: int, k: int) -> int:
        return int(self.y_start[f, i]) + k

    def to_placement(self, values: np.ndarray) -> Placement:
        """Read the selected level of every pair (largest indicator wins)."""
        F, U = self.y_start.shape
        x = np.zeros((F, U), dtype=np.int64)
        for f in range(F):
            n = int(self.levels[f]) + 1
            for i in range(U):
                s = int(self.y_start[f, i])
                x[f, i] = int(np.argmax(values[s:s + n]))
        return Placement(x)

    def from_placement(self, placement: Placement, shortfall: np.ndarray = None) -> np.ndarray:
        x = placement.counts if isinstance(placement, Placement) else np.asarray(placement)
        v = np.zeros(self.num_vars)
        v[self.y_start + x] = 1.0
        if shortfall is not None:
            v[self.aux.ravel()] = np.ravel(shortfall)
        return v


def variable_layout(scenario: Scenario) -> VariableLayout:
    F, U = scenario.shape
    levels = scenario.recover_segments.copy()
    y_start = np.zeros((F, U), dtype=np.int64)
    col = 0
    for f in range(F):
        for i in range(U):
            y_start[f, i] = col
            col += int(levels[f]) + 1
    aux = col + np.arange(F * U).reshape(F, U)
    return VariableLayout(levels, y_start, aux, col)


@dataclass
class AnocpModel(LinearProgram):
    """The lower-bound ILP for one scenario and window ``T``."""

    scenario: Scenario = None
    window: float = 0.0
    layout: VariableLayout = None
    transfer_table: np.ndarray = None
    row_labels: List[Tuple] = field(default_factory=list)
    eq_labels: List[Tuple] = field(default_factory=list)

    def shortfall(self, placement) -> np.ndarray:
        """``max(N[f, i], 0)`` for an integral placement, from the cover rows."""
        v = self.layout.from_placement(placement)
        F, U = self.scenario.shape
        cover = self.A_ub[: F * U]
        # cover row: -N' - (transfer terms) <= -S_rec  =>  N = S_rec - transfer
        n = -self.b_ub[: F * U] + cover @ v
        return np.maximum(n, 0.0).reshape(F, U)

    def objective_of(self, placement) -> float:
        """Model objective at an integral placement with ``N'`` at its minimum."""
        v = self.layout.from_placement(placement, self.shortfall(placement).ravel())
        return float(self.c @ v)

    def placement_of(self, values: np.ndarray) -> Placement:
        return self.layout.to_placement(values)


def build_anocp(scenario: Scenario, T: float) -> AnocpModel:
    """Assemble the lower-bound ILP at window ``T``."""
    layout = variable_layout(scenario)
    F, U = scenario.shape
    S = scenario.recover_segments
    table = transfer_expectation_table(scenario, T)
    n = layout.num_vars

    rows, cols, vals = [], [], []
    b_ub = []
    labels = []
    r = 0
    for f in range(F):
        for i in range(U):
            rows.append(r); cols.append(int(layout.aux[f, i])); vals.append(-1.0)
            for j in range(U):
                start = int(layout.y_start[f, j])
                for k in range(1, int(S[f]) + 1):
                    coef = k if j == i else table[i, j, k]
                    if coef != 0.0:
                        rows.append(r); cols.append(start + k); vals.append(-float(coef))
            b_ub.append(-float(S[f]))
            labels.append(("cover", f, i))
            r += 1
    for i in range(U):
        for f in range(F):
            start = int(layout.y_start[f, i])
            for k in range(1, int(S[f]) + 1):
                rows.append(r); cols.append(start + k); vals.append(float(k))
        b_ub.append(float(scenario.cache_capacity[i]))
        labels.append(("capacity", i))
        r += 1
    for f in range(F):
        for i in range(U):
            start = int(layout.y_start[f, i])
            for k in range(1, int(S[f]) + 1):
                rows.append(r); cols.append(start + k); vals.append(float(k))
        b_ub.append(float(scenario.max_segments[f]))
        labels.append(("budget", f))
        r += 1
    A_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, n))

    erows, ecols = [], []
    eq_labels = []
    e = 0
    for f in range(F):
        for i in range(U):
            start = int(layout.y_start[f, i])
            for k in range(int(S[f]) + 1):
                erows.append(e); ecols.append(start + k)
            eq_labels.append(("select", f, i))
            e += 1
    A_eq = sparse.csr_matrix((np.ones(len(erows)), (erows, ecols)), shape=(e, n))

    c = np.zeros(n)
    c[layout.aux] = scenario.popularity / (U * S[:, None])
    upper = np.full(n, np.inf)
    upper[: layout.num_y] = 1.0
    integrality = np.zeros(n, dtype=bool)
    integrality[: layout.num_y] = True

    return AnocpModel(
        c=c,
        A_ub=A_ub,
        b_ub=np.array(b_ub),
        A_eq=A_eq,
        b_eq=np.ones(e),
        lower=np.zeros(n),
        upper=upper,
        integrality=integrality,
        scenario=scenario,
        window=float(T),
        layout=layout,
        transfer_table=table,
        row_labels=labels,
        eq_labels=eq_labels,
    )


def _var_name(model: AnocpModel, col: int) -> str:
    lay = model.layout
    if col >= lay.num_y:
        f, i = divmod(col - lay.num_y, model.scenario.num_users)
        return f"n_{f}_{i}"
    F, U = lay.y_start.shape
    flat = lay.y_start.ravel()
    pos = int(np.searchsorted(flat, col, side="right")) - 1
    f, i = divmod(pos, U)
    return f"y_{f}_{i}_{col - flat[pos]}"


def _terms(model, row) -> str:
    parts = []
    for col, val in zip(row.indices, row.data):
        sign = "-" if val < 0 else "+"
        parts.append(f"{sign} {abs(val):.17g} {_var_name(model, col)}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp_format(model: AnocpModel, path: Union[str, Path, None] = None) -> str:
    """Render the model in CPLEX LP text format (and write it if ``path`` is given)."""
    out = ["\\ lower-bound placement model", f"\\ window T = {model.window!r}", "Minimize"]
    obj = sparse.csr_matrix(model.c.reshape(1, -1))
    out.append(" obj: " + (_terms(model, obj[0]) or "0"))
    out.append("Subject To")
    A_ub = sparse.csr_matrix(model.A_ub)
    for r, label in enumerate(model.row_labels):
        name = "_".join(str(p) for p in label)
        out.append(f" {name}: {_terms(model, A_ub[r])} <= {model.b_ub[r]:.17g}")
    A_eq = sparse.csr_matrix(model.A_eq)
    for r, label in enumerate(model.eq_labels):
        name = "_".join(str(p) for p in label)
        out.append(f" {name}: {_terms(model, A_eq[r])} = {model.b_eq[r]:.17g}")
    out.append("Bounds")
    for col in range(model.layout.num_y, model.num_vars):
        out.append(f" {_var_name(model, col)} >= 0")
    out.append("Binaries")
    names = [_var_name(model, col) for col in range(model.layout.num_y)]
    for n in range(0, len(names), 8):
        out.append(" " + " ".join(names[n:n + 8]))
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
