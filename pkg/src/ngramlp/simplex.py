"""Dense two-phase tableau simplex with Bland's rule.

Solves ``max c.x  s.t.  A x = b, x >= 0``.  Pivoting is fully deterministic:
the entering column is the lowest-index improving column and ties in the
ratio test go to the row whose basic variable has the lowest index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ngramlp.errors import SolverError, UsageError

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
REDUCED_COST_TOL = 1e-9
RATIO_TIE_TOL = 1e-12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """Maximize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64).ravel()
        A = np.array(self.A, dtype=np.float64, ndmin=2)
        b = np.array(self.b, dtype=np.float64).ravel()
        if c.size == 0 or A.shape[0] == 0:
            raise UsageError("an LP needs at least one variable and one constraint")
        if A.shape != (b.size, c.size):
            raise UsageError(f"A has shape {A.shape}, expected ({b.size}, {c.size})")
        for name, arr in (("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise UsageError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_constraints(self) -> int:
        return self.b.size

    def dump(self, precision: int = 6) -> str:
        """Fixed-precision text rendering: objective row first, then ``row | rhs`` lines."""
        fmt = f"{{:.{precision}f}}"
        lines = ["max " + " ".join(fmt.format(v) for v in self.c)]
        for row, rhs in zip(self.A, self.b):
            lines.append(" ".join(fmt.format(v) for v in row) + " = " + fmt.format(rhs))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SimplexSolution:
    status: str
    x: np.ndarray
    objective_value: float
    basis: tuple[int, ...]
    iterations: int
    reduced_costs: np.ndarray = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Rows 0..m-1 hold ``B^-1 [A | b]``; the last row holds reduced costs and ``-z``."""

    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.pivots = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        piv = T[row, col]
        if abs(piv) < PIVOT_TOL:
            raise SolverError(f"pivot element {piv:.3e} at row {row}, column {col} below tolerance")
        T[row] /= piv
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        T = self.T
        while True:
            if self.pivots >= max_iter:
                raise SolverError(f"iteration cap {max_iter} reached")
            r = T[-1, :-1]
            entering = np.flatnonzero((r > REDUCED_COST_TOL) & allowed)
            if entering.size == 0:
                return OPTIMAL
            e = int(entering[0])
            col = T[:-1, e]
            pos = col > PIVOT_TOL
            if not pos.any():
                return UNBOUNDED
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = T[:-1, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + RATIO_TIE_TOL * (1.0 + abs(best)))
            basic = np.asarray(self.basis)
            leave = int(ties[np.argmin(basic[ties])])
            self.pivot(leave, e)


def _default_cap(m: int, n: int) -> int:
    return 50 * (m + n) + 1000


def solve(lp: LinearProgram, max_iter: int | None = None) -> SimplexSolution:
    """Two-phase simplex.  Phase 1 minimizes the sum of one artificial per row."""
    A, b, c = lp.A.copy(), lp.b.copy(), lp.c
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    cap = _default_cap(m, n) if max_iter is None else max_iter

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    # phase-1 objective: maximize -sum(artificials); price out the artificial basis
    T[m, :n] = A.sum(axis=0)
    T[m, -1] = b.sum()
    tab = _Tableau(T, list(range(n, n + m)))
    allowed = np.ones(n + m, dtype=bool)
    tab.run(allowed, cap)

    scale = max(1.0, float(np.abs(b).max()))
    infeas = tab.T[m, -1]
    if infeas > FEAS_TOL * scale:
        x = _extract(tab, n)
        log.debug("phase 1 ended with artificial sum %.3e", infeas)
        return SimplexSolution(INFEASIBLE, x, float(c @ x), tuple(tab.basis), tab.pivots)

    # drive remaining artificials out of the basis; rows with no pivot are redundant
    redundant = []
    for row in range(m):
        if tab.basis[row] < n:
            continue
        cand = np.flatnonzero(np.abs(tab.T[row, :n]) > PIVOT_TOL)
        if cand.size:
            tab.pivot(row, int(cand[0]))
        else:
            redundant.append(row)
    keep = [r for r in range(m) if r not in redundant]
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = tab.T[keep, :n]
    T2[:-1, -1] = tab.T[keep, -1]
    basis = [tab.basis[r] for r in keep]
    cb = c[basis]
    T2[-1, :n] = c - cb @ T2[:-1, :n]
    T2[-1, -1] = -(cb @ T2[:-1, -1])
    tab2 = _Tableau(T2, basis)
    tab2.pivots = tab.pivots
    status = tab2.run(np.ones(n, dtype=bool), cap)

    x = _extract(tab2, n)
    if status == OPTIMAL:
        resid = float(np.abs(lp.A @ x - lp.b).max())
        if resid > FEAS_TOL * scale:
            raise SolverError(
                f"optimal basis {tab2.basis} violates A x = b by {resid:.3e}; "
                "the basis matrix is numerically singular")
    return SimplexSolution(status, x, float(c @ x), tuple(tab2.basis), tab2.pivots,
                           tab2.T[-1, :n].copy())


def _extract(tab: _Tableau, n: int) -> np.ndarray:
    x = np.zeros(n)
    for row, var in enumerate(tab.basis):
        if var < n:
            x[var] = tab.T[row, -1]
    return x
