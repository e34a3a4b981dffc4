"""Thresholded n-gram counts, MLE component probabilities and the probability matrix.

Token ids 0, 1, 2 are reserved for ``<unk>``, ``<s>`` and ``</s>``.  Order-j
counting pads each sentence on the left with ``<s>`` so that every word has a
full ``j-1`` token history; the first word of a trigram model is therefore
conditioned on ``<s> <s>``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ngramlp.corpus import BOS, EOS, Corpus
from ngramlp.errors import TrainingError, UsageError

UNK = "<unk>"
RESERVED = (UNK, BOS, EOS)
UNK_ID, BOS_ID, EOS_ID = 0, 1, 2


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    counts: tuple[int, ...]
    min_unigram_count: int = 1
    index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.tokens[:3] != RESERVED:
            raise UsageError("vocabulary must start with the reserved tokens")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    unk_id = UNK_ID

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        get = self.index.get
        return [get(t, UNK_ID) for t in tokens]

    @classmethod
    def build(cls, raw_counts: Counter, min_unigram_count: int) -> "Vocabulary":
        kept = sorted(t for t, c in raw_counts.items()
                      if c >= min_unigram_count and t not in RESERVED)
        tokens = RESERVED + tuple(kept)
        counts = [0] * len(tokens)
        index = {t: i for i, t in enumerate(tokens)}
        for t, c in raw_counts.items():
            counts[index.get(t, UNK_ID)] += c
        return cls(tokens, tuple(counts), min_unigram_count)


@dataclass(frozen=True)
class CountTable:
    """Counts of order-``order`` n-grams keyed by id tuples.

    ``context_totals`` holds, for each ``order-1`` token context, the summed
    count of all n-grams extending it, taken before thresholding.
    """

    order: int
    counts: dict
    context_totals: dict

    def __len__(self):
        return len(self.counts)

    def prob(self, key: tuple) -> float:
        c = self.counts.get(key)
        if not c:
            return 0.0
        total = self.context_totals.get(key[:-1])
        if not total:
            return 0.0
        return c / total


@dataclass(frozen=True)
class NgramModel:
    max_order: int
    vocabulary: Vocabulary
    tables: tuple[CountTable, ...]
    thresholds: tuple[int, ...]
    corpus_hash: str = ""
    unk_pseudo_count: int = 0

    def table(self, order: int) -> CountTable:
        if not 1 <= order <= self.max_order:
            raise UsageError(f"order must be in [1, {self.max_order}], got {order}")
        return self.tables[order - 1]

    def sizes(self) -> list[int]:
        return [len(t) for t in self.tables]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.max_order, list(self.thresholds), list(self.vocabulary.tokens),
                             list(self.vocabulary.counts)]).encode())
        for t in self.tables:
            for k in sorted(t.counts):
                h.update(repr((k, t.counts[k])).encode())
            for k in sorted(t.context_totals):
                h.update(repr((k, t.context_totals[k])).encode())
        return h.hexdigest()


def _padded(ids: list[int], order: int) -> list[int]:
    # ids already start with a single <s>
    return [BOS_ID] * max(order - 2, 0) + ids


def train(corpus: Corpus, max_order: int = 3, thresholds: Sequence[int] | None = None) -> NgramModel:
    """Count n-grams of orders 1..max_order and drop those below each order's threshold.

    Vocabulary is built from the unigram threshold first; tokens below it are
    rewritten to ``<unk>`` before higher orders are counted.  When the training
    text yields no ``<unk>`` occurrence, ``<unk>`` receives a single pseudo
    count so unseen test words keep a positive unigram probability.
    """
    if max_order < 1:
        raise UsageError(f"max_order must be >= 1, got {max_order}")
    thresholds = tuple(int(t) for t in (thresholds if thresholds is not None else [1] * max_order))
    if len(thresholds) != max_order:
        raise UsageError(f"need {max_order} thresholds, got {len(thresholds)}")
    if any(t < 0 for t in thresholds):
        raise UsageError("thresholds must be non-negative")
    if len(corpus) == 0:
        raise TrainingError("cannot train on an empty corpus")

    raw = Counter()
    for s in corpus:
        raw.update(s.tokens)
    vocab = Vocabulary.build(raw, thresholds[0])
    encoded = [vocab.encode(s.tokens) for s in corpus]

    tables = []
    unk_pseudo = 0
    for j in range(1, max_order + 1):
        counts = Counter()
        for ids in encoded:
            seq = _padded(ids, j)
            counts.update(tuple(seq[i:i + j]) for i in range(len(seq) - j + 1))
        if j == 1 and counts[(UNK_ID,)] == 0:
            unk_pseudo = 1
            counts[(UNK_ID,)] = 1
        totals = Counter()
        for key, c in counts.items():
            totals[key[:-1]] += c
        thr = thresholds[j - 1]
        if j == 1:
            kept = {k: c for k, c in counts.items() if c >= thr or k[0] < len(RESERVED)}
        else:
            kept = {k: c for k, c in counts.items() if c >= thr}
        tables.append(CountTable(j, kept, dict(totals)))
    return NgramModel(max_order, vocab, tuple(tables), thresholds, corpus.digest(), unk_pseudo)


def mle_prob(model: NgramModel, order: int, target: int, context: Sequence[int] = ()) -> float:
    """C(context target) / C(context), or 0 if either count is missing."""
    table = model.table(order)
    context = tuple(context)
    if len(context) != order - 1:
        raise UsageError(f"order {order} needs a context of length {order - 1}, got {len(context)}")
    return table.prob(context + (int(target),))


@dataclass(frozen=True)
class ProbabilityMatrix:
    """N x n component probabilities; column j-1 holds the order-j MLE estimate.

    ``positions`` maps each row back to (sentence index, token index) in the
    source text.
    """

    values: np.ndarray
    positions: np.ndarray = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, ndmin=2)
        if v.size == 0:
            v = v.reshape(0, v.shape[-1] if v.ndim == 2 else 0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.positions is None:
            pos = np.column_stack([np.zeros(len(v), np.int64), np.arange(len(v))])
        else:
            pos = np.array(self.positions, dtype=np.int64).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_orders(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n_rows

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position"] + [f"p{j + 1}" for j in range(self.n_orders)])
        for i, row in enumerate(self.values.tolist()):
            w.writerow([i] + [repr(x) for x in row])
        return buf.getvalue()


def probability_matrix(model: NgramModel, text: Corpus) -> ProbabilityMatrix:
    n = model.max_order
    pad = max(n - 2, 0)
    rows, positions = [], []
    for si, s in enumerate(text):
        seq = [BOS_ID] * pad + model.vocabulary.encode(s.tokens)
        # scored positions are the words: skip leading <s> and trailing </s>
        for ti in range(1, len(s.tokens) - 1):
            i = ti + pad
            rows.append([model.tables[j].prob(tuple(seq[i - j:i + 1])) for j in range(n)])
            positions.append((si, ti))
    values = np.array(rows, dtype=np.float64).reshape(len(rows), n)
    return ProbabilityMatrix(values, np.array(positions, dtype=np.int64).reshape(-1, 2))


def save_model(model: NgramModel, directory, seed=None) -> Path:
    """Write ``header.json``, ``vocab.tsv``, ``order_<j>.tsv`` and ``contexts_<j>.tsv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    header = {
        "n": model.max_order,
        "thresholds": list(model.thresholds),
        "seed": seed,
        "corpus_hash": model.corpus_hash,
        "unk_pseudo_count": model.unk_pseudo_count,
        "sizes": model.sizes(),
    }
    (d / "header.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(d / "vocab.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, (tok, c) in enumerate(zip(model.vocabulary.tokens, model.vocabulary.counts)):
            fh.write(f"{tok}\t{i}\t{c}\n")
    for t in model.tables:
        with open(d / f"order_{t.order}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(t.counts):
                fh.write("\t".join(map(str, key)) + f"\t{t.counts[key]}\n")
        with open(d / f"contexts_{t.order}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(t.context_totals):
                fh.write("\t".join(map(str, key + (t.context_totals[key],))) + "\n")
    return d


def _read_table(path: Path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            out[tuple(int(x) for x in parts[:-1])] = int(parts[-1])
    return out


def load_model(directory) -> NgramModel:
    d = Path(directory)
    header = json.loads((d / "header.json").read_text(encoding="utf-8"))
    tokens, counts = [], []
    with open(d / "vocab.tsv", encoding="utf-8") as fh:
        for line in fh:
            tok, _, c = line.rstrip("\n").split("\t")
            tokens.append(tok)
            counts.append(int(c))
    n = int(header["n"])
    tables = tuple(
        CountTable(j, _read_table(d / f"order_{j}.tsv"), _read_table(d / f"contexts_{j}.tsv"))
        for j in range(1, n + 1)
    )
    vocab = Vocabulary(tuple(tokens), tuple(counts), int(header["thresholds"][0]))
    return NgramModel(n, vocab, tables, tuple(header["thresholds"]), header.get("corpus_hash", ""),
                      int(header.get("unk_pseudo_count", 0)))
