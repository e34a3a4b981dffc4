"""Interpolated mixture probabilities and perplexity.

Weights are indexed by n-gram order: ``lambdas[0]`` is the unigram weight,
``lambdas[1]`` the bigram weight, and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ngramlp.errors import UsageError

SIMPLEX_TOL = 1e-9
LN2 = math.log(2.0)


@dataclass(frozen=True)
class WeightVector:
    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise UsageError("weight vector is empty")
        if not all(math.isfinite(x) for x in lam):
            raise UsageError(f"non-finite weight in {lam}")
        if min(lam) < 0.0:
            raise UsageError(f"negative weight in {lam}")
        if abs(math.fsum(lam) - 1.0) > SIMPLEX_TOL:
            raise UsageError(f"weights sum to {math.fsum(lam)!r}, not 1")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def cleaned(cls, raw: Sequence[float], snap: float = SIMPLEX_TOL) -> "WeightVector":
        """Snap components within ``snap`` of zero to zero and renormalize.

        Meant for solver output with round-off drift, not for arbitrary vectors.
        """
        a = np.asarray(raw, dtype=np.float64).copy()
        a[np.abs(a) <= snap] = 0.0
        if np.any(a < 0):
            raise UsageError(f"weights {a.tolist()} are not on the simplex")
        return cls(tuple((a / a.sum()).tolist()))

    @classmethod
    def vertex(cls, n: int, order: int) -> "WeightVector":
        lam = [0.0] * n
        lam[order - 1] = 1.0
        return cls(tuple(lam))

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls((1.0 / n,) * n)

    def as_array(self) -> np.ndarray:
        return np.array(self.lambdas)

    def is_vertex(self, tol: float = SIMPLEX_TOL) -> bool:
        a = self.as_array()
        return int(np.sum(np.abs(a - 1.0) <= tol)) == 1 and int(np.sum(a > tol)) == 1

    def __len__(self):
        return len(self.lambdas)

    def __iter__(self):
        return iter(self.lambdas)

    def __getitem__(self, i):
        return self.lambdas[i]


@dataclass(frozen=True)
class PerplexityValue:
    value: float
    log2_per_token: float
    n_tokens: int

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return self.value


def _weights_array(w) -> np.ndarray:
    if isinstance(w, WeightVector):
        return w.as_array()
    return WeightVector(tuple(w)).as_array()


def _matrix_array(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise UsageError(f"probability matrix must be 2-D, got shape {m.shape}")
    return m


def mixture_prob(row: Sequence[float], w) -> float:
    lam = _weights_array(w)
    p = np.asarray(row, dtype=np.float64)
    if p.shape != lam.shape:
        raise UsageError(f"row has {p.size} entries but there are {lam.size} weights")
    return float(p @ lam)


def mixture_probs(matrix, w) -> np.ndarray:
    m = _matrix_array(matrix)
    lam = _weights_array(w)
    if m.shape[1] != lam.size:
        raise UsageError(f"matrix has {m.shape[1]} columns but there are {lam.size} weights")
    return m @ lam


def log_likelihood(matrix, w) -> float:
    """Sum of natural-log mixture probabilities; -inf at a weak-model point."""
    mix = mixture_probs(matrix, w)
    if mix.size == 0:
        raise UsageError("perplexity needs at least one scored token")
    if np.any(mix <= 0.0):
        return -math.inf
    return float(np.sum(np.log(mix)))


def perplexity(matrix, w) -> PerplexityValue:
    """Inverse geometric mean of the mixture probabilities, computed in log space.

    Returns ``inf`` when any token gets zero probability.
    """
    ll = log_likelihood(matrix, w)
    n = _matrix_array(matrix).shape[0]
    if ll == -math.inf:
        return PerplexityValue(math.inf, math.inf, n)
    log2 = -ll / (n * LN2)
    return PerplexityValue(float(np.exp2(log2)), log2, n)


def two_param_weights(lam: float, mu: float) -> WeightVector:
    """Expand the nested trigram form lam*P3 + (1-lam)*(mu*P2 + (1-mu)*P1)."""
    for name, v in (("lambda", lam), ("mu", mu)):
        if not 0.0 <= v <= 1.0:
            raise UsageError(f"{name} must lie in [0, 1], got {v}")
    return WeightVector(((1 - lam) * (1 - mu), (1 - lam) * mu, lam))
