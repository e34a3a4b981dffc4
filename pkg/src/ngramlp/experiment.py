"""K-fold comparison of weight-selection methods, report emission and synthetic corpora.

For fold ``f`` the sentences assigned to ``f`` are the test portion.  The
remaining sentences are shuffled and divided between training and validation
in the ratio ``train_frac : (1 - train_frac) / 2``.  Counts come from the
training portion only, every method picks weights on the validation portion,
and the comparison metric is perplexity on the test portion.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ngramlp.corpus import Corpus, Sentence, make_folds
from ngramlp.errors import ExperimentError, UsageError
from ngramlp.grid import GridConfig, grid_search, random_search
from ngramlp.mixture import WeightVector, perplexity
from ngramlp.ngram import RESERVED, probability_matrix, train
from ngramlp.optimize import optimize_exact, optimize_lp

log = logging.getLogger(__name__)

METHODS = ("grid", "random", "lp_reduced", "lp_full", "exact")
SD_DEFINITION = "sample standard deviation (k-1 denominator) over folds with finite perplexity"
PROTOCOL = ("weights selected on the validation portion; compared by perplexity on the held-out "
            "test fold; n-gram counts from the training portion only")


@dataclass(frozen=True)
class ExperimentConfig:
    max_order: int = 3
    thresholds: tuple[int, ...] = (1, 1, 1)
    k: int = 8
    seed: int = 0
    grid_steps: tuple[float, ...] = (0.1, 0.01)
    methods: tuple[str, ...] = ("grid", "random", "lp_reduced", "exact")
    epsilon: tuple[float, ...] | None = None
    train_frac: float = 0.6
    random_samples: int = 1000
    exact_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(int(t) for t in self.thresholds))
        object.__setattr__(self, "grid_steps", tuple(float(s) for s in self.grid_steps))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.epsilon is not None:
            object.__setattr__(self, "epsilon", tuple(float(e) for e in self.epsilon))
        self.validate()

    def validate(self) -> None:
        if self.k < 2:
            raise UsageError(f"k must be at least 2, got {self.k}")
        if self.max_order < 1:
            raise UsageError(f"max_order must be >= 1, got {self.max_order}")
        if len(self.thresholds) != self.max_order:
            raise UsageError(f"{len(self.thresholds)} thresholds given for max_order {self.max_order}")
        if not self.methods:
            raise UsageError("no methods configured")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise UsageError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise UsageError(f"duplicate methods in {list(self.methods)}")
        if "grid" in self.methods and not self.grid_steps:
            raise UsageError("grid method needs at least one grid step")
        for s in self.grid_steps:
            GridConfig(s, self.max_order)
        if not 0.0 < self.train_frac < 1.0:
            raise UsageError(f"train_frac must lie in (0, 1), got {self.train_frac}")
        if self.random_samples < 1:
            raise UsageError("random_samples must be >= 1")
        if self.epsilon is not None and len(self.epsilon) not in (1, self.max_order):
            raise UsageError(f"epsilon needs 1 or {self.max_order} values")

    def method_labels(self) -> list[str]:
        labels = []
        for m in self.methods:
            if m == "grid":
                labels.extend(f"grid({s:g})" for s in self.grid_steps)
            else:
                labels.append(m)
        return labels

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("thresholds", "grid_steps", "methods", "epsilon"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise UsageError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class FoldRecord:
    fold: int
    method: str
    weights: tuple[float, ...]
    validation_perplexity: float
    test_perplexity: float
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[FoldRecord]
    fold_info: list[dict]
    aggregates: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    def method_labels(self) -> list[str]:
        return self.config.method_labels()

    def records_for(self, method: str) -> list[FoldRecord]:
        return [r for r in self.records if r.method == method]

    def to_dict(self) -> dict:
        """JSON-ready view.  Wall-clock timings are left out so reruns are byte-identical."""
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "protocol": PROTOCOL,
            "sd_definition": SD_DEFINITION,
            "folds": self.fold_info,
            "records": [
                {
                    "fold": r.fold,
                    "method": r.method,
                    "weights": list(r.weights),
                    "validation_perplexity": _jf(r.validation_perplexity),
                    "test_perplexity": _jf(r.test_perplexity),
                }
                for r in self.records
            ],
            "aggregates": {m: {k: _jf(v) for k, v in a.items()} for m, a in self.aggregates.items()},
        }


def _jf(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else "inf"
    return x


def summarize(values: Sequence[float]) -> dict:
    """Mean and sample SD of the finite values; infinite ones are only counted."""
    arr = np.asarray(values, dtype=np.float64)
    fin = arr[np.isfinite(arr)]
    ev = float(fin.mean()) if fin.size else math.nan
    sd = float(fin.std(ddof=1)) if fin.size > 1 else math.nan
    return {"ev": ev, "sd": sd, "n_finite": int(fin.size), "n_infinite": int(arr.size - fin.size)}


def _select(method: str, matrix, cfg: ExperimentConfig, fold: int) -> WeightVector:
    if method.startswith("grid("):
        step = float(method[5:-1])
        return grid_search(matrix, GridConfig(step, cfg.max_order)).weights
    if method == "random":
        return random_search(matrix, cfg.random_samples, seed=[cfg.seed, fold, 1]).weights
    if method in ("lp_reduced", "lp_full"):
        form = "reduced" if method == "lp_reduced" else "full"
        return optimize_lp(matrix, form, cfg.epsilon).weights
    if method == "exact":
        return optimize_exact(matrix, tol=cfg.exact_tol).weights
    raise UsageError(f"unknown method {method!r}")


def fold_portions(corpus: Corpus, assignments: np.ndarray, fold: int, cfg: ExperimentConfig):
    """Indices of (train, validation, test) sentences for one fold."""
    test = np.flatnonzero(assignments == fold)
    rest = np.flatnonzero(assignments != fold)
    val_share = (1.0 - cfg.train_frac) / (1.0 + cfg.train_frac)
    n_val = int(math.floor(rest.size * val_share + 1e-9))
    perm = np.random.default_rng([cfg.seed, fold, 0]).permutation(rest.size)
    val = np.sort(rest[perm[:n_val]])
    tr = np.sort(rest[perm[n_val:]])
    if tr.size == 0 or val.size == 0:
        raise ExperimentError(f"fold {fold}: cannot populate train and validation from {rest.size} sentences",
                              fold=fold)
    return tr, val, test


def _run_fold(corpus: Corpus, assignments: np.ndarray, fold: int, cfg: ExperimentConfig):
    tr, val, test = fold_portions(corpus, assignments, fold, cfg)
    model = train(corpus.subset(tr), cfg.max_order, cfg.thresholds)
    if len(model.vocabulary) <= len(RESERVED):
        raise ExperimentError(f"fold {fold}: training portion yields an empty vocabulary", fold=fold)
    mv = probability_matrix(model, corpus.subset(val))
    mt = probability_matrix(model, corpus.subset(test))
    if mv.n_rows == 0 or mt.n_rows == 0:
        raise ExperimentError(f"fold {fold}: validation or test portion has no scored tokens", fold=fold)
    records = []
    for label in cfg.method_labels():
        t0 = time.perf_counter()
        try:
            w = _select(label, mv, cfg, fold)
        except ExperimentError:
            raise
        except Exception as exc:
            raise ExperimentError(f"fold {fold}, method {label}: {exc}", fold=fold) from exc
        elapsed = time.perf_counter() - t0
        records.append(FoldRecord(fold, label, w.lambdas, perplexity(mv, w).value,
                                  perplexity(mt, w).value, elapsed))
    info = {"fold": fold, "train_sentences": int(tr.size), "validation_sentences": int(val.size),
            "test_sentences": int(test.size), "validation_tokens": mv.n_rows, "test_tokens": mt.n_rows,
            "ngram_sizes": model.sizes(), "model_fingerprint": model.fingerprint()}
    return records, info


def run_experiment(corpus: Corpus, cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    if len(corpus) < cfg.k:
        raise ExperimentError(f"{len(corpus)} sentences are too few for {cfg.k} folds")
    plan = make_folds(corpus, cfg.k, cfg.seed)
    folds = range(cfg.k)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda f: _run_fold(corpus, plan.assignments, f, cfg), folds))
    else:
        results = [_run_fold(corpus, plan.assignments, f, cfg) for f in folds]
    records = [r for recs, _ in results for r in recs]
    info = [i for _, i in results]
    report = ExperimentReport(cfg, records, info)
    for label in cfg.method_labels():
        recs = report.records_for(label)
        test = summarize([r.test_perplexity for r in recs])
        val = summarize([r.validation_perplexity for r in recs])
        report.aggregates[label] = {
            "ev": test["ev"], "sd": test["sd"], "n_finite": test["n_finite"], "n_infinite": test["n_infinite"],
            "validation_ev": val["ev"], "validation_sd": val["sd"], "validation_n_infinite": val["n_infinite"],
        }
        log.info("%s: test EV %.4f SD %.4f (%d infinite)", label, test["ev"], test["sd"], test["n_infinite"])
    return report


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def emit_report(report: ExperimentReport, directory) -> list[Path]:
    """Write report.json, summary.csv and boxplot.csv; returns the paths written."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / "report.json", d / "summary.csv", d / "boxplot.csv"]
    paths[0].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(paths[1], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "ev", "sd", "n_infinite"])
        for label in report.method_labels():
            a = report.aggregates[label]
            w.writerow([label, _fmt(a["ev"]), _fmt(a["sd"]), a["n_infinite"]])
    with open(paths[2], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "fold", "test_perplexity"])
        for label in report.method_labels():
            for r in report.records_for(label):
                w.writerow([label, r.fold, _fmt(r.test_perplexity)])
    return paths


class _SyntheticTrigram:
    """Randomly parameterized trigram mixture; context distributions derive from hashed seeds."""

    def __init__(self, vocab_size: int, weights: np.ndarray, seed: int,
                 bigram_support: int = 8, trigram_support: int = 4):
        self.V = vocab_size
        self.weights = weights
        self.seed = seed
        self.bos = vocab_size
        rng = np.random.default_rng([seed, 1])
        zipf = 1.0 / np.arange(1, vocab_size + 1)
        self.unigram = np.cumsum(zipf[rng.permutation(vocab_size)] / zipf.sum())
        self.supports = (min(bigram_support, vocab_size), min(trigram_support, vocab_size))
        self._cache = {}

    def _dist(self, key: tuple):
        d = self._cache.get(key)
        if d is None:
            rng = np.random.default_rng([self.seed, *key])
            size = self.supports[key[0] - 2]
            support = rng.choice(self.V, size=size, replace=False)
            d = (support, np.cumsum(rng.dirichlet(np.ones(size))))
            self._cache[key] = d
        return d

    def sample_word(self, rng, h2: int, h1: int) -> int:
        comp = int(np.searchsorted(np.cumsum(self.weights), rng.random(), side="right"))
        comp = min(comp, 2)
        u = rng.random()
        if comp == 0:
            return min(int(np.searchsorted(self.unigram, u, side="right")), self.V - 1)
        support, cdf = self._dist((2, h1) if comp == 1 else (3, h2, h1))
        return int(support[min(int(np.searchsorted(cdf, u, side="right")), support.size - 1)])


def generate_synthetic_corpus(vocab_size: int, weights: Sequence[float], n_sentences: int, seed: int = 0,
                              mean_length: float = 8.0) -> Corpus:
    """Sample sentences from a random interpolated trigram model with mixing weights ``weights``.

    ``weights`` is ordered (unigram, bigram, trigram).  Sentence lengths are
    ``1 + Poisson(mean_length - 1)``.
    """
    if vocab_size < 1 or n_sentences < 1:
        raise UsageError("vocab_size and n_sentences must be positive")
    w = WeightVector(tuple(weights))
    if len(w) != 3:
        raise UsageError(f"synthetic corpora use trigram mixtures; got {len(w)} weights")
    model = _SyntheticTrigram(vocab_size, w.as_array(), seed)
    rng = np.random.default_rng([seed, 0])
    names = [f"w{i}" for i in range(vocab_size)]
    sentences = []
    for _ in range(n_sentences):
        length = 1 + int(rng.poisson(max(mean_length - 1.0, 0.0)))
        h2 = h1 = model.bos
        words = []
        for _ in range(length):
            tok = model.sample_word(rng, h2, h1)
            words.append(names[tok])
            h2, h1 = h1, tok
        sentences.append(Sentence.from_words(words))
    label = f"synthetic(V={vocab_size}, weights={list(w.lambdas)}, sentences={n_sentences}, seed={seed})"
    return Corpus(tuple(sentences), label)


def corpus_to_text(corpus: Corpus) -> str:
    return "".join(" ".join(s.words) + "\n" for s in corpus)
