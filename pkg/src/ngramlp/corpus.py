"""Corpus ingestion, tokenization and deterministic train/validation/test partitioning.

Input text is one sentence per line.  Each non-empty line becomes a
:class:`Sentence` wrapped in ``<s>`` ... ``</s>`` boundary markers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ngramlp.errors import FoldError, IngestionError, SplitError, UsageError

BOS = "<s>"
EOS = "</s>"


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) < 3:
            raise UsageError("a sentence needs at least one word between its boundary markers")
        if self.tokens[0] != BOS or self.tokens[-1] != EOS:
            raise UsageError("sentence must start with <s> and end with </s>")

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Sentence":
        return cls((BOS, *words, EOS))

    @property
    def words(self) -> tuple[str, ...]:
        """Tokens without the boundary markers."""
        return self.tokens[1:-1]

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    source_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def subset(self, indices: Iterable[int], label: str | None = None) -> "Corpus":
        return Corpus(tuple(self.sentences[i] for i in indices),
                      self.source_label if label is None else label)

    @property
    def n_words(self) -> int:
        return sum(len(s.words) for s in self.sentences)

    def digest(self) -> str:
        h = hashlib.sha256()
        for s in self.sentences:
            h.update(" ".join(s.tokens).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every sentence to one of ``k`` folds."""

    k: int
    assignments: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64).copy()
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sentence_index", "fold"])
        for i, f in enumerate(self.assignments.tolist()):
            w.writerow([i, f])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="")


def _strip_punct(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and unicodedata.category(tok[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(tok[end - 1]).startswith("P"):
        end -= 1
    return tok[start:end]


def tokenize_line(line: str) -> Sentence | None:
    """Tokenize one line; returns None when nothing survives."""
    text = unicodedata.normalize("NFC", line).lower()
    words = [w for w in (_strip_punct(t) for t in text.split()) if w]
    if not words:
        return None
    return Sentence.from_words(words)


def tokenize(raw_text: str | bytes) -> list[Sentence]:
    """Split raw text into sentences, one per non-empty line.

    Bytes are decoded as strict UTF-8; a decoding failure raises
    :class:`IngestionError` carrying the offending byte offset.
    """
    if isinstance(raw_text, (bytes, bytearray)):
        try:
            raw_text = bytes(raw_text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestionError(f"invalid UTF-8 at byte offset {exc.start}",
                                 byte_offset=exc.start) from None
    out = []
    for line in raw_text.splitlines():
        s = tokenize_line(line)
        if s is not None:
            out.append(s)
    return out


def read_corpus(path, source_label: str | None = None) -> Corpus:
    path = Path(path)
    sentences = tokenize(path.read_bytes())
    return Corpus(tuple(sentences), path.name if source_label is None else source_label)


def _permutation(n: int, seed) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def split(corpus: Corpus, train_frac: float = 0.6, seed: int = 0) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffle and partition into (train, validation, test).

    Train gets ``floor(N * train_frac)`` sentences, validation half of the
    rest (rounded down) and test the remainder.
    """
    if not 0.0 < train_frac < 1.0:
        raise UsageError(f"train_frac must lie in (0, 1), got {train_frac}")
    n = len(corpus)
    n_train = int(math.floor(n * train_frac + 1e-9))
    n_val = (n - n_train) // 2
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise SplitError(f"{n} sentences cannot populate train/validation/test at train_frac={train_frac}")
    perm = _permutation(n, seed)
    train = corpus.subset(np.sort(perm[:n_train]))
    val = corpus.subset(np.sort(perm[n_train:n_train + n_val]))
    test = corpus.subset(np.sort(perm[n_train + n_val:]))
    return train, val, test


def fold_assignments(n_items: int, k: int, seed) -> np.ndarray:
    """Balanced fold index per item: the i-th item of a seeded shuffle goes to fold ``i % k``."""
    if k < 2:
        raise UsageError(f"k must be at least 2, got {k}")
    if k > n_items:
        raise FoldError(f"cannot make {k} folds from {n_items} sentences")
    perm = _permutation(n_items, seed)
    out = np.empty(n_items, dtype=np.int64)
    out[perm] = np.arange(n_items) % k
    return out


def make_folds(corpus: Corpus | Sequence, k: int, seed: int = 0) -> FoldPlan:
    return FoldPlan(k, fold_assignments(len(corpus), k, seed), seed)
