from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngramlp.corpus import BOS, EOS, Corpus, Sentence, tokenize
from ngramlp.errors import TrainingError, UsageError
from ngramlp.ngram import (
    UNK,
    UNK_ID,
    load_model,
    mle_prob,
    probability_matrix,
    save_model,
    train,
)


def corpus(*lines):
    return Corpus(tuple(tokenize("\n".join(lines))))


def ids(model, *tokens):
    return tuple(model.vocabulary.id(t) for t in tokens)


def brute_prob(sentences, order, target, context):
    """Count ratio from scratch over padded token strings (no model internals)."""
    num = den = 0
    for s in sentences:
        seq = [BOS] * max(order - 2, 0) + list(s.tokens)
        for i in range(len(seq) - order + 1):
            window = tuple(seq[i:i + order])
            if window[:-1] == tuple(context):
                den += 1
                if window[-1] == target:
                    num += 1
    return num / den if den else 0.0


class TestTrain:
    def test_tiny_counts(self):
        m = train(corpus("a b a b"), 2, (1, 1))
        uni, bi = m.tables
        assert uni.counts[ids(m, "a")] == 2
        assert uni.counts[ids(m, "b")] == 2
        assert uni.counts[ids(m, BOS)] == 1
        assert uni.counts[ids(m, EOS)] == 1
        assert bi.counts[ids(m, "a", "b")] == 2
        assert bi.counts[ids(m, "b", "a")] == 1
        assert bi.counts[ids(m, BOS, "a")] == 1
        assert bi.counts[ids(m, "b", EOS)] == 1

    def test_threshold_above_all_counts(self):
        m = train(corpus("a b a b", "a b"), 3, (1, 1, 100))
        assert len(m.table(3)) == 0
        assert len(m.table(2)) > 0

    def test_empty_corpus(self):
        with pytest.raises(TrainingError):
            train(Corpus(()), 3)

    def test_bad_thresholds(self):
        with pytest.raises(UsageError):
            train(corpus("a"), 3, (1, 1))
        with pytest.raises(UsageError):
            train(corpus("a"), 0)

    def test_unigram_threshold_builds_vocab(self):
        m = train(corpus("a a b", "a c"), 1, (2,))
        assert "a" in m.vocabulary
        assert "b" not in m.vocabulary and "c" not in m.vocabulary
        assert m.vocabulary.id("zzz") == UNK_ID
        assert m.table(1).counts[(UNK_ID,)] == 2
        assert m.unk_pseudo_count == 0

    def test_unk_pseudo_count_when_no_oov(self):
        m = train(corpus("a b"), 2)
        assert m.unk_pseudo_count == 1
        assert m.table(1).counts[(UNK_ID,)] == 1

    def test_deterministic(self):
        c = corpus("x y z x", "y z", "z z x y")
        assert train(c, 3).fingerprint() == train(c, 3).fingerprint()

    def test_count_le_context_total(self):
        c = corpus("a b c a b", "b c a", "c c c a b")
        m = train(c, 3, (1, 2, 1))
        for t in m.tables:
            for key, cnt in t.counts.items():
                total = t.context_totals.get(key[:-1])
                assert cnt >= 1
                assert total is None or cnt <= total


class TestMle:
    def test_trigram_ratio(self):
        m = train(corpus("a b c", "a b c", "a b d", "a b e"), 3)
        assert m.table(2).context_totals[ids(m, "a")] == 4
        assert mle_prob(m, 3, m.vocabulary.id("c"), ids(m, "a", "b")) == 0.5

    def test_unseen_trigram(self):
        m = train(corpus("a b c"), 3)
        assert mle_prob(m, 3, m.vocabulary.id("a"), ids(m, "c", "b")) == 0.0

    def test_unigram_ratio(self):
        # 5 sentences x (8 words + 2 markers) = 50 tokens; z_i fall below threshold 2
        lines = [f"a b b b b b b z{i}" for i in range(5)]
        m = train(corpus(*lines), 1, (2,))
        assert m.table(1).context_totals[()] == 50
        assert mle_prob(m, 1, m.vocabulary.id("a")) == pytest.approx(0.1, abs=0)

    def test_order_out_of_range(self):
        m = train(corpus("a b"), 2)
        with pytest.raises(UsageError):
            mle_prob(m, 3, 0, (0, 0))
        with pytest.raises(UsageError):
            mle_prob(m, 0, 0, ())
        with pytest.raises(UsageError):
            mle_prob(m, 2, 0, ())

    @given(st.lists(st.lists(st.sampled_from("abcd"), min_size=1, max_size=7), min_size=1, max_size=12),
           st.integers(1, 3))
    @settings(max_examples=60, deadline=None)
    def test_context_sums(self, sents, thr):
        c = Corpus(tuple(Sentence.from_words(s) for s in sents))
        full = train(c, 3)
        pruned = train(c, 3, (1, thr, thr))
        for model, exact in ((full, True), (pruned, False)):
            for t in model.tables:
                sums = defaultdict(float)
                for key in t.counts:
                    sums[key[:-1]] += t.prob(key)
                for ctx, s in sums.items():
                    assert s <= 1.0 + 1e-12
                    if exact and t.order > 1:
                        assert s == pytest.approx(1.0, abs=1e-12)


class TestProbabilityMatrix:
    def test_matches_brute_force(self):
        train_c = corpus("the cat sat", "the cat ran", "a cat sat")
        text = corpus("the cat sat")
        # "ran" and "a" fall below the unigram threshold, so <unk> needs no pseudo count
        m = train(train_c, 3, (2, 1, 1))
        pm = probability_matrix(m, text)
        words = ["the", "cat", "sat"]
        history = [BOS, BOS, BOS]
        expected = []
        for w in words:
            expected.append([brute_prob(train_c, 1, w, ()),
                             brute_prob(train_c, 2, w, history[-1:]),
                             brute_prob(train_c, 3, w, history[-2:])])
            history.append(w)
        # hand values: P1(the)=2/15, P2(the|<s>)=2/3, P3(sat|the cat)=1/2
        assert expected[0][0] == pytest.approx(2 / 15)
        assert expected[0][1] == pytest.approx(2 / 3)
        assert expected[2][2] == pytest.approx(1 / 2)
        np.testing.assert_allclose(pm.values, expected, rtol=0, atol=1e-15)
        assert pm.positions.tolist() == [[0, 1], [0, 2], [0, 3]]

    def test_pointwise_consistency(self):
        c = corpus("x y z x y", "y y z", "z x")
        m = train(c, 3, (1, 1, 2))
        text = corpus("x y z", "q x y")
        pm = probability_matrix(m, text)
        row = 0
        for s in text:
            seq = [1] + m.vocabulary.encode(s.tokens)
            for ti in range(1, len(s.tokens) - 1):
                i = ti + 1
                for j in (1, 2, 3):
                    assert pm.values[row, j - 1] == mle_prob(m, j, seq[i], seq[i - j + 1:i])
                row += 1
        assert row == pm.n_rows

    def test_unseen_context_gives_zero(self):
        m = train(corpus("a b c"), 3)
        pm = probability_matrix(m, corpus("c a b"))
        assert pm.values[1, 2] == 0.0  # trigram context (<s>, c) never seen before "a"

    def test_oov_row_positive(self):
        m = train(corpus("a b", "a c"), 3, (2, 1, 1))
        pm = probability_matrix(m, corpus("never seen words"))
        assert np.all(pm.values[:, 0] > 0)
        assert np.all(pm.values <= 1) and np.all(pm.values >= 0)

    def test_empty_text(self):
        m = train(corpus("a b"), 3)
        pm = probability_matrix(m, Corpus(()))
        assert pm.values.shape == (0, 3)

    def test_csv(self):
        m = train(corpus("a b"), 2)
        lines = probability_matrix(m, corpus("a b")).to_csv().splitlines()
        assert lines[0] == "position,p1,p2"
        assert len(lines) == 3


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        c = corpus("the cat sat", "the dog sat down", "a cat ran")
        m = train(c, 3, (1, 1, 1))
        save_model(m, tmp_path / "model", seed=11)
        loaded = load_model(tmp_path / "model")
        assert loaded.fingerprint() == m.fingerprint()
        text = corpus("the cat sat down", "unknown cat")
        np.testing.assert_array_equal(probability_matrix(m, text).values,
                                      probability_matrix(loaded, text).values)
        header = (tmp_path / "model" / "header.json").read_text()
        assert '"seed": 11' in header and '"thresholds"' in header

    def test_tsv_layout(self, tmp_path):
        m = train(corpus("a b a b"), 2)
        d = save_model(m, tmp_path / "m")
        vocab = (d / "vocab.tsv").read_text().splitlines()
        assert vocab[0] == f"{UNK}\t0\t0"  # pseudo count lives in the unigram table only
        bigrams = (d / "order_2.tsv").read_text().splitlines()
        assert all(len(line.split("\t")) == 3 for line in bigrams)
