"""Baseline weight searches: exhaustive simplex lattice and uniform random sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ngramlp.errors import UsageError
from ngramlp.mixture import PerplexityValue, WeightVector, _matrix_array, perplexity

_CHUNK_CELLS = 4_000_000
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class GridConfig:
    step: float
    n: int = 3

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise UsageError(f"grid step must lie in (0, 1], got {self.step}")
        inv = 1.0 / self.step
        if abs(inv - round(inv)) > 1e-9 * max(1.0, inv):
            raise UsageError(f"1/step must be an integer, got step={self.step}")
        if self.n < 1:
            raise UsageError(f"need at least one weight, got n={self.n}")

    @property
    def divisions(self) -> int:
        return int(round(1.0 / self.step))


@dataclass(frozen=True)
class SearchResult:
    weights: WeightVector
    perplexity: PerplexityValue
    points_evaluated: int


def simplex_lattice(n: int, m: int) -> np.ndarray:
    """Integer points k with sum(k) == m, enumerated with k[0] in the outermost loop.

    Rows are in the same order a nested for-loop over k[0], k[1], ... k[n-2]
    would visit them; the last coordinate absorbs the remainder.
    """
    if n == 1:
        return np.array([[m]], dtype=np.int64)
    rows = []

    def rec(prefix, remaining, depth):
        if depth == n - 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, depth + 1)

    rec([], m, 0)
    return np.array(rows, dtype=np.int64)


def lattice_size(n: int, m: int) -> int:
    return math.comb(m + n - 1, n - 1)


def batch_log_likelihood(matrix: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Sum of log mixture probabilities for each row of ``weights``; -inf where any is zero."""
    n_rows = max(matrix.shape[0], 1)
    chunk = max(1, _CHUNK_CELLS // n_rows)
    out = np.empty(weights.shape[0])
    for start in range(0, weights.shape[0], chunk):
        w = weights[start:start + chunk]
        mix = matrix @ w.T
        bad = np.any(mix <= 0.0, axis=0)
        with np.errstate(divide="ignore"):
            ll = np.log(mix).sum(axis=0)
        ll[bad] = -np.inf
        out[start:start + chunk] = ll
    return out


def _best(matrix: np.ndarray, candidates: np.ndarray, make_weights) -> SearchResult:
    ll = batch_log_likelihood(matrix, candidates)
    n = matrix.shape[1]
    if np.all(np.isneginf(ll)):
        w = WeightVector.vertex(n, 1)
        return SearchResult(w, perplexity(matrix, w), len(candidates))
    best = ll.max()
    # first point within round-off of the best, i.e. first encountered in loop order
    i = int(np.flatnonzero(ll >= best - TIE_RTOL * max(1.0, abs(best)))[0])
    w = make_weights(i)
    return SearchResult(w, perplexity(matrix, w), len(candidates))


def grid_search(matrix, cfg: GridConfig | float) -> SearchResult:
    m = _matrix_array(matrix)
    if m.shape[0] == 0:
        raise UsageError("grid search needs a non-empty probability matrix")
    if not isinstance(cfg, GridConfig):
        cfg = GridConfig(float(cfg), m.shape[1])
    if cfg.n != m.shape[1]:
        raise UsageError(f"grid is for {cfg.n} weights but the matrix has {m.shape[1]} columns")
    div = cfg.divisions
    lattice = simplex_lattice(cfg.n, div)
    return _best(m, lattice / div, lambda i: WeightVector(tuple((lattice[i] / div).tolist())))


def random_search(matrix, samples: int, seed: int = 0) -> SearchResult:
    """Best of all simplex vertices plus ``samples`` uniform Dirichlet(1, ..., 1) draws."""
    if samples < 1:
        raise UsageError(f"samples must be >= 1, got {samples}")
    m = _matrix_array(matrix)
    if m.shape[0] == 0:
        raise UsageError("random search needs a non-empty probability matrix")
    n = m.shape[1]
    draws = np.random.default_rng(seed).dirichlet(np.ones(n), size=samples)
    draws /= draws.sum(axis=1, keepdims=True)
    cand = np.vstack([np.eye(n), draws])
    return _best(m, cand, lambda i: WeightVector(tuple(cand[i].tolist())))
