"""Acceptance suite.  Every test carries a ``criterion`` mark; the terminal summary
prints one PASS/FAIL line per criterion.  Each check uses an oracle that does
not share code with the route it verifies.
"""

import csv
import io
import json
import math
import time
from itertools import combinations

import numpy as np
import pytest

from ngramlp.cli import main
from ngramlp.corpus import make_folds, split
from ngramlp.experiment import corpus_to_text, generate_synthetic_corpus
from ngramlp.grid import grid_search, random_search
from ngramlp.mixture import WeightVector, perplexity
from ngramlp.ngram import probability_matrix, train
from ngramlp.optimize import (
    build_model8_full,
    build_model8_reduced,
    log_likelihood_gradient,
    optimize_exact,
    optimize_lp,
)
from ngramlp.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, solve

LP_VERTEX = "LP vertex law (500 instances, 1e-8, <10 s)"
LP_FORMS = "full/reduced LP equivalence (100 instances, 1e-8, <30 s)"
SIMPLEX = "simplex vs vertex enumeration (200 LPs, 1e-8) and fixtures"
GRID = "grid exhaustiveness (66 / 5151 points, 50 naive comparisons)"
PPL = "perplexity numerics (rel 1e-9, all-ones = 1.0, zero -> inf)"
EXACT = "exact-oracle dominance (100 instances, +1e-6) and gradient (rel 1e-5)"
E2E = "end-to-end synthetic experiment (k=8, <60 s, three files, exact best on validation)"
SURFACE = "surface data n=2 step 0.01 (f <= min <= g/n, max gap 1.0 at corner)"
DETERMINISM = "determinism (splits, folds, random search, synthetic corpus)"


def random_matrix(rng, n_max_rows=200, orders=(2, 3, 4), zero_frac=0.3, positive_first=False):
    N = int(rng.integers(1, n_max_rows + 1))
    n = int(rng.choice(orders))
    m = rng.uniform(0, 1, size=(N, n))
    m[rng.random(m.shape) < zero_frac] = 0.0
    if positive_first:
        m[:, 0] = rng.uniform(1e-3, 1, size=N)
    return m


def naive_perplexity(matrix, lam):
    prod = 1.0
    for row in matrix:
        prod *= sum(l * p for l, p in zip(lam, row))
    return math.inf if prod == 0.0 else prod ** (-1.0 / len(matrix))


def enumerate_vertices(c, A, b):
    A, b, c = np.asarray(A, float), np.asarray(b, float), np.asarray(c, float)
    r = np.linalg.matrix_rank(A)
    best = None
    for cols in combinations(range(A.shape[1]), r):
        B = A[:, cols]
        if np.linalg.matrix_rank(B) < r:
            continue
        xb = np.linalg.lstsq(B, b, rcond=None)[0]
        if np.abs(B @ xb - b).max() > 1e-9 or xb.min() < -1e-9:
            continue
        val = float(c[list(cols)] @ xb)
        best = val if best is None else max(best, val)
    return best


@pytest.mark.criterion(LP_VERTEX)
def test_lp_vertex_law():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(500):
        m = random_matrix(rng)
        res = optimize_lp(m)
        sums = [sum(m[:, j]) for j in range(m.shape[1])]
        assert res.weights.is_vertex()
        assert res.surrogate_objective == pytest.approx(max(sums), abs=1e-8)
        j = res.weights.lambdas.index(1.0)
        assert sums[j] == pytest.approx(max(sums), abs=1e-8)
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.criterion(LP_FORMS)
def test_full_reduced_equivalence():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    for _ in range(100):
        m = random_matrix(rng)
        full = solve(build_model8_full(m))
        red = solve(build_model8_reduced(m))
        assert full.status == red.status == OPTIMAL
        assert abs(full.objective_value - red.objective_value) <= 1e-8
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.criterion(SIMPLEX)
def test_simplex_against_enumeration():
    rng = np.random.default_rng(99)
    seen = {OPTIMAL: 0, INFEASIBLE: 0}
    for i in range(200):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(m, 9))
        A = rng.normal(size=(m, n)).round(2)
        A[-1] = rng.uniform(0.1, 1.0, size=n).round(2)
        if i % 4 == 3:
            b = rng.normal(size=m)
            b[-1] = abs(b[-1])
        else:
            b = A @ (rng.uniform(0, 1, size=n) * (rng.random(n) < 0.6))
        c = rng.normal(size=n).round(2)
        sol = solve(LinearProgram(c, A, b))
        expected = enumerate_vertices(c, A, b)
        if expected is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert abs(sol.objective_value - expected) <= 1e-8
            assert np.abs(A @ sol.x - b).max() <= 1e-8
        seen[sol.status] += 1
    assert seen[OPTIMAL] > 100 and seen[INFEASIBLE] > 0
    assert solve(LinearProgram([1], [[1], [1]], [1, 2])).status == INFEASIBLE
    assert solve(LinearProgram([1, 1], [[1, 1]], [-1])).status == INFEASIBLE
    assert solve(LinearProgram([1, 0], [[1, -1]], [1])).status == UNBOUNDED
    assert solve(LinearProgram([0, 0, 1], [[1, -1, 0], [0, 1, -1]], [1, 0])).status == UNBOUNDED


@pytest.mark.criterion(GRID)
def test_grid_exhaustiveness():
    m = np.random.default_rng(0).uniform(0.01, 1, size=(10, 3))
    assert grid_search(m, 0.1).points_evaluated == 66
    assert grid_search(m, 0.01).points_evaluated == 5151
    rng = np.random.default_rng(50)
    for _ in range(50):
        m = rng.uniform(0, 1, size=(10, 3))
        m[rng.random(m.shape) < 0.2] = 0.0
        m[:, 0] = np.maximum(m[:, 0], 0.01)
        best, best_w = math.inf, None
        for k1 in range(11):
            for k2 in range(11 - k1):
                lam = (k1 / 10, k2 / 10, (10 - k1 - k2) / 10)
                p = naive_perplexity(m, lam)
                if p < best * (1 - 1e-12):
                    best, best_w = p, lam
        res = grid_search(m, 0.1)
        assert res.perplexity.value == pytest.approx(best, rel=1e-9)
        np.testing.assert_allclose(res.weights.as_array(), best_w, atol=1e-12)


@pytest.mark.criterion(PPL)
def test_perplexity_numerics():
    rng = np.random.default_rng(5)
    for _ in range(300):
        N = int(rng.integers(1, 21))
        n = int(rng.integers(1, 5))
        m = rng.uniform(1e-4, 1, size=(N, n))
        w = WeightVector.cleaned(rng.dirichlet(np.ones(n)))
        direct = naive_perplexity(m, w.lambdas)
        assert perplexity(m, w).value == pytest.approx(direct, rel=1e-9)
    for n in (1, 2, 3, 4):
        for N in (1, 7, 1000):
            assert perplexity(np.ones((N, n)), WeightVector.uniform(n)).value == 1.0
    m = rng.uniform(0.1, 1, size=(20, 3))
    m[13] = [0.4, 0.0, 0.0]
    assert perplexity(m, WeightVector((0.0, 0.5, 0.5))).value == math.inf
    assert perplexity(m, WeightVector((0.1, 0.5, 0.4))).value < math.inf


@pytest.mark.criterion(EXACT)
def test_exact_dominance():
    rng = np.random.default_rng(6)
    for _ in range(100):
        m = random_matrix(rng, n_max_rows=60, orders=(3,), positive_first=True)
        ex = optimize_exact(m).true_perplexity.value
        lp = optimize_lp(m).true_perplexity.value
        gs = grid_search(m, 0.01).perplexity.value
        assert ex <= min(lp, gs) + 1e-6
    for _ in range(30):
        m = rng.uniform(0.01, 1, size=(25, 3))
        lam = rng.dirichlet(np.ones(3)) * 0.9 + 0.1 / 3
        g = log_likelihood_gradient(m, lam)
        for j in range(3):
            h = np.zeros(3)
            h[j] = 1e-6
            fd = (np.log(m @ (lam + h)).sum() - np.log(m @ (lam - h)).sum()) / 2e-6
            assert abs(g[j] - fd) <= 1e-5 * abs(fd)


@pytest.fixture(scope="module")
def e2e_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("e2e")
    corpus = generate_synthetic_corpus(200, (0.2, 0.5, 0.3), 5000, seed=0)
    (d / "corpus.txt").write_text(corpus_to_text(corpus), encoding="utf-8")
    t0 = time.perf_counter()
    code = main(["experiment", "--corpus", str(d / "corpus.txt"), "--out", str(d / "out"), "--k", "8",
                 "--seed", "0"])
    return code, time.perf_counter() - t0, d / "out"


def _mean(values):
    return math.inf if any(v == "inf" for v in values) else sum(values) / len(values)


@pytest.mark.criterion(E2E)
def test_end_to_end(e2e_run, note):
    code, elapsed, out = e2e_run
    assert code == 0
    assert elapsed < 60.0
    assert all((out / f).is_file() for f in ("report.json", "summary.csv", "boxplot.csv"))
    report = json.loads((out / "report.json").read_text())
    by_method = {}
    for r in report["records"]:
        by_method.setdefault(r["method"], []).append(r)
    assert all(len(v) == 8 for v in by_method.values())
    val = {m: _mean([r["validation_perplexity"] for r in recs]) for m, recs in by_method.items()}
    test = {m: _mean([r["test_perplexity"] for r in recs]) for m, recs in by_method.items()}
    for m, v in val.items():
        assert val["exact"] <= v + 1e-6, m
    note(f"end-to-end wall time: {elapsed:.1f} s")
    for m in by_method:
        note(f"  {m:<12} mean validation {val[m]:.4f}  mean test {test[m]:.4f}")
    lp, gs = test["lp_reduced"], min(test["grid(0.1)"], test["grid(0.01)"])
    winner = "LP" if lp < gs else "grid" if gs < lp else "tie"
    note(f"test-perplexity ordering LP vs grid: {winner} lower (LP {lp}, best grid {gs})")
    rows = list(csv.reader(io.StringIO((out / "boxplot.csv").read_text())))
    assert rows[0] == ["method", "fold", "test_perplexity"] and len(rows) == 1 + 8 * len(by_method)


def test_recovery_trend(note):
    """Reported only: exact-oracle weights against the generating weights as data grows."""
    target = np.array([0.2, 0.5, 0.3])
    for n_sent in (125, 1250, 12500):
        corpus = generate_synthetic_corpus(200, target, n_sent, seed=1)
        tr, val, _ = split(corpus, 0.6, seed=1)
        model = train(tr, 3)
        m = probability_matrix(model, val)
        res = optimize_exact(m)
        lam = res.weights.as_array()
        fine = grid_search(m, 0.01)
        assert res.true_perplexity.value <= fine.perplexity.value + 1e-6
        note(f"recovery: {corpus.n_words:>6} tokens  exact {np.round(lam, 3).tolist()}  "
             f"L1 to target {np.abs(lam - target).sum():.3f}")


@pytest.mark.criterion(SURFACE)
def test_surface(capsys, tmp_path):
    path = tmp_path / "surface.csv"
    assert main(["surface", "--n", "2", "--step", "0.01", "--out", str(path)]) == 0
    capsys.readouterr()
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x1", "x2", "f", "g"]
    data = np.array(rows[1:], dtype=float)
    assert len(data) == 101 * 101
    x, f, g = data[:, :2], data[:, 2], data[:, 3]
    assert np.all(f <= x.min(axis=1))
    assert np.all(x.min(axis=1) <= g / 2)
    gap = np.abs(f - g)
    assert gap.max() == 1.0
    corner = gap[(x[:, 0] == 1.0) & (x[:, 1] == 1.0)]
    assert corner.tolist() == [1.0]


@pytest.mark.criterion(DETERMINISM)
def test_determinism():
    corpus = generate_synthetic_corpus(50, (0.3, 0.4, 0.3), 300, seed=21)
    again = generate_synthetic_corpus(50, (0.3, 0.4, 0.3), 300, seed=21)
    assert corpus_to_text(corpus).encode() == corpus_to_text(again).encode()

    def split_text(c):
        return "|".join(corpus_to_text(p) for p in split(c, 0.6, seed=4)).encode()
    assert split_text(corpus) == split_text(corpus)

    assert make_folds(corpus, 8, 3).to_csv() == make_folds(corpus, 8, 3).to_csv()
    assert make_folds(corpus, 8, 3).assignments.tobytes() == make_folds(corpus, 8, 3).assignments.tobytes()

    m = np.random.default_rng(0).uniform(0.01, 1, size=(40, 3))
    a, b = random_search(m, 500, seed=12), random_search(m, 500, seed=12)
    assert np.asarray(a.weights.lambdas).tobytes() == np.asarray(b.weights.lambdas).tobytes()
    assert a.perplexity == b.perplexity
