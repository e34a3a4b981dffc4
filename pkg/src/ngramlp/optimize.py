"""Choosing interpolation weights by linear programming, plus an exact log-likelihood oracle.

The LP maximizes the *sum* of mixture probabilities over the weight simplex,
a linear stand-in for their product.  Because its objective is linear in the
weights it always lands on a simplex vertex.  :func:`optimize_exact`
maximizes the sum of *log* mixture probabilities instead, which minimizes
perplexity exactly, and serves to measure how far the LP answer is from
the true optimum.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ngramlp.errors import SolverError, UsageError, WeakModelError
from ngramlp.mixture import PerplexityValue, WeightVector, _matrix_array, perplexity
from ngramlp.simplex import LinearProgram, solve

log = logging.getLogger(__name__)

LP_FULL = "lp_full"
LP_REDUCED = "lp_reduced"
EXACT = "exact_convex"


@dataclass(frozen=True)
class OptimizationResult:
    weights: WeightVector
    surrogate_objective: float
    true_perplexity: PerplexityValue
    method: str
    solver_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        ppl = self.true_perplexity
        return {
            "method": self.method,
            "weights": list(self.weights.lambdas),
            "surrogate_objective": self.surrogate_objective,
            "true_perplexity": _json_float(ppl.value),
            "log2_per_token": _json_float(ppl.log2_per_token),
            "n_tokens": ppl.n_tokens,
            "solver_stats": self.solver_stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _json_float(x: float):
    return x if math.isfinite(x) else "inf"


def _checked(matrix) -> np.ndarray:
    m = _matrix_array(matrix)
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise UsageError("optimization needs a non-empty probability matrix")
    return m


def _bounds(lower_bounds, n: int) -> np.ndarray:
    if lower_bounds is None:
        return np.zeros(n)
    eps = np.asarray(lower_bounds, dtype=np.float64).ravel()
    if eps.size == 1:
        eps = np.full(n, float(eps[0]))
    if eps.size != n or np.any(eps < 0) or eps.sum() > 1.0 + 1e-12:
        raise UsageError(f"lower bounds {eps.tolist()} must be {n} non-negative values summing to <= 1")
    return eps


def build_model8_full(matrix, lower_bounds=None) -> LinearProgram:
    """LP over ``(lambda_1..lambda_n, P_1..P_N)`` with one equality row per token.

    Row i reads ``sum_j p[i][j] * lambda_j - P_i = 0``; the last row is
    ``sum_j lambda_j = 1``; the objective is ``sum_i P_i``.  With lower bounds
    the lambda columns hold ``lambda_j - eps_j`` and the right-hand sides shift
    accordingly.
    """
    m = _checked(matrix)
    N, n = m.shape
    eps = _bounds(lower_bounds, n)
    A = np.zeros((N + 1, n + N))
    A[:N, :n] = m
    A[:N, n:] = -np.eye(N)
    A[N, :n] = 1.0
    b = np.zeros(N + 1)
    b[:N] = -(m @ eps)
    b[N] = 1.0 - eps.sum()
    c = np.concatenate([np.zeros(n), np.ones(N)])
    return LinearProgram(c, A, b)


def build_model8_reduced(matrix, lower_bounds=None) -> LinearProgram:
    """Substitute the token rows into the objective: maximize ``sum_j s_j lambda_j``.

    ``s_j`` is the column sum of the matrix; the only constraint left is the
    simplex row.
    """
    m = _checked(matrix)
    n = m.shape[1]
    eps = _bounds(lower_bounds, n)
    return LinearProgram(m.sum(axis=0), np.ones((1, n)), [1.0 - eps.sum()])


def optimize_lp(matrix, form: str = "reduced", lower_bounds=None) -> OptimizationResult:
    m = _checked(matrix)
    n = m.shape[1]
    eps = _bounds(lower_bounds, n)
    if form == "full":
        lp, method = build_model8_full(m, eps), LP_FULL
    elif form == "reduced":
        lp, method = build_model8_reduced(m, eps), LP_REDUCED
    else:
        raise UsageError(f"form must be 'full' or 'reduced', got {form!r}")
    t0 = time.perf_counter()
    sol = solve(lp)
    elapsed = time.perf_counter() - t0
    if not sol.optimal:
        raise SolverError(f"weight LP reported {sol.status}; the weight simplex is never empty")
    w = WeightVector.cleaned(sol.x[:n] + eps)
    lam = w.as_array()
    stats = {"iterations": sol.iterations, "seconds": elapsed, "lp_objective": sol.objective_value,
             "lower_bounds": eps.tolist()}
    return OptimizationResult(w, float(np.sum(m @ lam)), perplexity(m, w), method, stats)


def log_likelihood_gradient(matrix, lam) -> np.ndarray:
    """d/d lambda_j of sum_i ln(sum_k lambda_k p[i][k]), i.e. sum_i p[i][j] / mixture_i."""
    m = np.asarray(matrix, dtype=np.float64)
    mix = m @ np.asarray(lam, dtype=np.float64)
    return (m / mix[:, None]).sum(axis=0)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} by the sort-and-threshold rule."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ks > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _ll(m: np.ndarray, lam: np.ndarray) -> float:
    mix = m @ lam
    if np.any(mix <= 0.0):
        return -math.inf
    return float(np.sum(np.log(mix)))


def _fw_gap(m: np.ndarray, lam: np.ndarray) -> float:
    g = log_likelihood_gradient(m, lam)
    return float(g.max() - g @ lam)


def _newton_polish(m: np.ndarray, lam: np.ndarray, tol: float, rounds: int = 20) -> tuple[np.ndarray, int]:
    """Equality-constrained Newton steps on the support face of ``lam``.

    Used once the function value can no longer resolve progress; each step is
    accepted only if it keeps ``lam`` feasible and lowers the Frank-Wolfe gap.
    """
    gap = _fw_gap(m, lam)
    done = 0
    for _ in range(rounds):
        if gap <= tol:
            break
        S = np.flatnonzero(lam > 0.0)
        mix = m @ lam
        g = (m[:, S] / mix[:, None]).sum(axis=0)
        q = m[:, S] / mix[:, None]
        H = -(q.T @ q)
        s = S.size
        K = np.zeros((s + 1, s + 1))
        K[:s, :s] = H
        K[:s, s] = -1.0
        K[s, :s] = 1.0
        rhs = np.concatenate([-g, [0.0]])
        d = np.linalg.lstsq(K, rhs, rcond=None)[0][:s]
        neg = d < 0
        t = min(1.0, float(np.min(-lam[S][neg] / d[neg]))) if np.any(neg) else 1.0
        cand = lam.copy()
        cand[S] = np.maximum(lam[S] + t * d, 0.0)
        cand /= cand.sum()
        if np.any(m @ cand <= 0.0):
            break
        new_gap = _fw_gap(m, cand)
        if not new_gap < gap:
            break
        lam, gap = cand, new_gap
        done += 1
    return lam, done


def optimize_exact(matrix, tol: float = 1e-8, max_iter: int = 100_000) -> OptimizationResult:
    """Maximize sum_i ln(mixture_i) over the simplex by projected gradient ascent.

    Steps start from a Barzilai-Borwein estimate and are halved until an Armijo
    condition holds.  Stops once the Frank-Wolfe gap ``max_j g_j - g @ lambda``,
    an upper bound on the distance to the optimal log-likelihood, drops to
    ``tol``.
    """
    m = _checked(matrix)
    N, n = m.shape
    if np.any(m.max(axis=1) <= 0.0):
        bad = int(np.flatnonzero(m.max(axis=1) <= 0.0)[0])
        raise WeakModelError(f"row {bad} is all zeros; every weight vector gives it probability 0")
    t0 = time.perf_counter()
    lam = np.full(n, 1.0 / n)
    F = _ll(m, lam)
    g = log_likelihood_gradient(m, lam)
    gap = float(g.max() - g @ lam)
    step = 1.0 / max(float(np.abs(g).max()), 1.0)
    sigma = 1e-4
    it, evals, converged = 0, 1, gap <= tol
    while not converged and it < max_iter:
        it += 1
        while True:
            cand = project_simplex(lam + step * g)
            d = cand - lam
            Fc = _ll(m, cand)
            evals += 1
            if Fc >= F + sigma * float(g @ d):
                break
            step *= 0.5
            if step < 1e-300:
                break
        if not np.any(d) or Fc <= F:
            lam, polished = _newton_polish(m, lam, tol)
            it += polished
            g = log_likelihood_gradient(m, lam)
            gap = float(g.max() - g @ lam)
            converged = gap <= tol
            if not converged:
                log.warning("projected gradient stalled with gap %.3e", gap)
            break
        g_new = log_likelihood_gradient(m, cand)
        y = g_new - g
        sy = -float(d @ y)
        step = float(d @ d) / sy if sy > 0 else step * 2.0
        step = min(max(step, 1e-12), 1e12)
        lam, F, g = cand, Fc, g_new
        gap = float(g.max() - g @ lam)
        converged = gap <= tol
    if not converged:
        log.warning("exact optimizer stopped after %d iterations with gap %.3e", it, gap)
    w = WeightVector.cleaned(lam)
    lam = w.as_array()
    stats = {"iterations": it, "function_evaluations": evals, "fw_gap": gap, "converged": bool(converged),
             "seconds": time.perf_counter() - t0, "tol": tol}
    return OptimizationResult(w, float(np.sum(m @ lam)), perplexity(m, w), EXACT, stats)


def approximation_surface(n: int, grid_step: float) -> np.ndarray:
    """Rows ``(x_1..x_n, prod(x), sum(x))`` for every lattice point of the unit box."""
    if n not in (2, 3):
        raise UsageError(f"surface data is only produced for n in {{2, 3}}, got {n}")
    if not 0.0 < grid_step <= 1.0 or abs(1.0 / grid_step - round(1.0 / grid_step)) > 1e-9 / grid_step:
        raise UsageError(f"1/grid_step must be a positive integer, got {grid_step}")
    div = int(round(1.0 / grid_step))
    axis = np.arange(div + 1) / div
    pts = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return np.column_stack([pts, pts.prod(axis=1), pts.sum(axis=1)])


def surface_to_csv(table: np.ndarray, out=None) -> str | None:
    n = table.shape[1] - 2
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(n)] + ["f", "g"])
    for row in table.tolist():
        w.writerow([repr(v) for v in row])
    return buf.getvalue() if out is None else None
